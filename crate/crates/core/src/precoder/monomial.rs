//! Exponent vectors over a generator set and the monomial basis `[n]^g`.

use std::fmt;

use itertools::Itertools;
use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};

/// Upper limit on explicitly enumerated basis sizes.
pub const BASIS_BUDGET: u64 = 1 << 20;

/// Exponents of one monomial, one slot per generator, each at least 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExponentVector(pub Vec<u32>);

impl ExponentVector {
    /// Membership in `[m]^g`.
    pub fn in_box(&self, m: u32) -> bool {
        self.0.iter().all(|&e| (1..=m).contains(&e))
    }

    /// The exponent vector after multiplying by generator `slot`.
    pub fn bumped(&self, slot: usize) -> ExponentVector {
        let mut v = self.0.clone();
        v[slot] += 1;
        ExponentVector(v)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }
}

impl fmt::Display for ExponentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.0.iter().join(","))
    }
}

/// `n^g` as an exact integer.
pub fn basis_size(g: usize, n: u32) -> BigUint {
    BigUint::from(n).pow(g as u32)
}

/// All of `[n]^g` in lexicographic order.
pub fn monomial_basis(g: usize, n: u32) -> Result<Vec<ExponentVector>> {
    if n == 0 {
        return Err(Error::ZeroOrder);
    }
    if g == 0 {
        return Err(Error::EmptyGenerators);
    }
    let size = basis_size(g, n);
    if size.to_u64().is_none_or(|s| s > BASIS_BUDGET) {
        return Err(Error::DimensionBudget { what: "basis size", value: size.to_string(), budget: BASIS_BUDGET });
    }
    Ok((0..g).map(|_| 1..=n).multi_cartesian_product().map(ExponentVector).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_cases() {
        assert_eq!(monomial_basis(3, 1).unwrap(), vec![ExponentVector(vec![1, 1, 1])]);
        let b = monomial_basis(3, 2).unwrap();
        assert_eq!(b.len(), 8);
        assert!(b.windows(2).all(|w| w[0] < w[1]), "lexicographic");
        assert_eq!(monomial_basis(2, 0).unwrap_err(), Error::ZeroOrder);
        assert_eq!(monomial_basis(0, 2).unwrap_err(), Error::EmptyGenerators);
        assert!(matches!(monomial_basis(54, 2), Err(Error::DimensionBudget { .. })));
    }

    #[test]
    fn bump_leaves_box_only_at_the_edge() {
        let e = ExponentVector(vec![2, 1, 2]);
        assert!(e.in_box(2));
        assert!(!e.bumped(0).in_box(2));
        assert!(e.bumped(0).in_box(3));
        assert!(e.bumped(1).in_box(2));
    }

    proptest! {
        #[test]
        fn size_and_nesting(g in 1usize..=6, n in 1u32..=4) {
            let b = monomial_basis(g, n).unwrap();
            prop_assert_eq!(BigUint::from(b.len()), basis_size(g, n));
            prop_assert!(b.iter().all(|e| e.in_box(n) && e.in_box(n + 1)));
            let next = monomial_basis(g, n + 1).unwrap();
            prop_assert!(b.iter().all(|e| next.binary_search(e).is_ok()));
        }

        #[test]
        fn larger_generator_counts(g in 7usize..=20) {
            prop_assert_eq!(monomial_basis(g, 1).unwrap().len(), 1);
            prop_assert_eq!(basis_size(g, 4), BigUint::from(4u32).pow(g as u32));
        }
    }
}
