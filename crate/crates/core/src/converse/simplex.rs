//! Exact-rational primal simplex with Bland's rule.
//!
//! Solves `max c·x` subject to `A x ≤ b`, `x ≥ 0`, with `b ≥ 0` so the
//! slack basis is feasible from the start.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::ratio::Q;

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { value: Q, x: Vec<Q> },
    Unbounded,
}

impl LpOutcome {
    pub fn value(&self) -> Option<&Q> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(value),
            LpOutcome::Unbounded => None,
        }
    }
}

pub fn maximize(c: &[Q], a: &[Vec<Q>], b: &[Q]) -> Result<LpOutcome> {
    let n = c.len();
    let m = a.len();
    if b.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(Error::Lp("malformed"));
    }
    if b.iter().any(|v| v.is_negative()) {
        return Err(Error::Lp("infeasible at the origin"));
    }
    let width = n + m + 1;
    let mut tab: Vec<Vec<Q>> = (0..m)
        .map(|i| {
            let mut row = vec![Q::zero(); width];
            row[..n].clone_from_slice(&a[i]);
            row[n + i] = Q::from_integer(1.into());
            row[width - 1] = b[i].clone();
            row
        })
        .collect();
    // Objective row holds -c so entering columns are the negative entries.
    let mut obj = vec![Q::zero(); width];
    for (j, cj) in c.iter().enumerate() {
        obj[j] = -cj.clone();
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    while let Some(enter) = (0..width - 1).find(|&j| obj[j].is_negative()) {
        let mut leave: Option<usize> = None;
        for i in 0..m {
            if !tab[i][enter].is_positive() {
                continue;
            }
            let better = match leave {
                None => true,
                Some(l) => {
                    let ri = &tab[i][width - 1] / &tab[i][enter];
                    let rl = &tab[l][width - 1] / &tab[l][enter];
                    ri < rl || (ri == rl && basis[i] < basis[l])
                }
            };
            if better {
                leave = Some(i);
            }
        }
        let Some(l) = leave else { return Ok(LpOutcome::Unbounded) };
        let pivot = tab[l][enter].clone();
        for v in tab[l].iter_mut() {
            *v = &*v / &pivot;
        }
        let pivot_row = tab[l].clone();
        for (i, row) in tab.iter_mut().enumerate() {
            if i != l && !row[enter].is_zero() {
                let f = row[enter].clone();
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= &f * p;
                }
            }
        }
        if !obj[enter].is_zero() {
            let f = obj[enter].clone();
            for (v, p) in obj.iter_mut().zip(&pivot_row) {
                *v -= &f * p;
            }
        }
        basis[l] = enter;
    }
    let mut x = vec![Q::zero(); n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = tab[i][width - 1].clone();
        }
    }
    Ok(LpOutcome::Optimal { value: obj[width - 1].clone(), x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::{q, qi};
    use proptest::prelude::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → 36 at (2, 6).
        let c = [qi(3), qi(5)];
        let a = vec![vec![qi(1), qi(0)], vec![qi(0), qi(2)], vec![qi(3), qi(2)]];
        let b = [qi(4), qi(12), qi(18)];
        assert_eq!(maximize(&c, &a, &b).unwrap(), LpOutcome::Optimal { value: qi(36), x: vec![qi(2), qi(6)] });
    }

    #[test]
    fn unbounded_and_degenerate() {
        let c = [qi(1), qi(1)];
        let a = vec![vec![qi(1), qi(-1)]];
        assert_eq!(maximize(&c, &a, &[qi(1)]).unwrap(), LpOutcome::Unbounded);
        // Degenerate vertex at the origin (rhs 0 rows) must not cycle.
        let a = vec![vec![qi(1), qi(-1)], vec![qi(-1), qi(1)], vec![qi(1), qi(1)]];
        let out = maximize(&c, &a, &[qi(0), qi(0), qi(1)]).unwrap();
        assert_eq!(out.value(), Some(&qi(1)));
        assert!(maximize(&c, &a, &[qi(-1), qi(0), qi(1)]).is_err());
    }

    #[test]
    fn fractional_optimum() {
        // max x + y, 7/4 x + y ≤ 1, 3/2 x + 7/6 y ≤ 1.
        let c = [qi(1), qi(1)];
        let a = vec![vec![q(7, 4), qi(1)], vec![q(3, 2), q(7, 6)]];
        let out = maximize(&c, &a, &[qi(1), qi(1)]).unwrap();
        assert_eq!(out.value(), Some(&q(6, 7)));
    }

    proptest! {
        #[test]
        fn row_scaling_invariance(
            rows in proptest::collection::vec(proptest::collection::vec(1i64..9, 3), 1..6),
            scales in proptest::collection::vec((1i64..7, 1i64..7), 6),
        ) {
            let c = vec![qi(1), qi(2), qi(1)];
            let a: Vec<Vec<Q>> = rows.iter().map(|r| r.iter().map(|&v| qi(v)).collect()).collect();
            let b = vec![qi(1); a.len()];
            let base = maximize(&c, &a, &b).unwrap();
            let sa: Vec<Vec<Q>> = a.iter().zip(&scales).map(|(r, &(p, d))| r.iter().map(|v| v * q(p, d)).collect()).collect();
            let sb: Vec<Q> = b.iter().zip(&scales).map(|(v, &(p, d))| v * q(p, d)).collect();
            let scaled = maximize(&c, &sa, &sb).unwrap();
            prop_assert_eq!(base.value(), scaled.value());
        }
    }
}
