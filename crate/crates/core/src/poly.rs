//! Sparse integer-coefficient polynomials over channel variables.
//!
//! Used to classify effective channels exactly (a neutralized channel is the
//! zero polynomial) and to build Jacobians of precoder polynomial families.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;

use crate::topology::{BsId, UserId};

/// Underlying random variable: a channel coefficient `h(user, bs)` or a
/// random precoder entry `u(intended, group, bs)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    H(UserId, BsId),
    U { intended: UserId, group: usize, bs: BsId },
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::H(u, b) => write!(f, "h[{},{}]", u.0, b.0),
            Var::U { intended, group, bs } => write!(f, "u[{},A{},{}]", intended.0, group + 1, bs.0),
        }
    }
}

/// A monomial as a sorted list of `(variable, exponent)` with exponents ≥ 1.
pub type Monomial = Vec<(Var, u32)>;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Poly {
    terms: BTreeMap<Monomial, i64>,
}

fn mul_monomials(a: &Monomial, b: &Monomial) -> Monomial {
    let mut acc: BTreeMap<Var, u32> = a.iter().copied().collect();
    for &(v, e) in b {
        *acc.entry(v).or_insert(0) += e;
    }
    acc.into_iter().collect()
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: i64) -> Self {
        let mut p = Poly::zero();
        if c != 0 {
            p.terms.insert(Vec::new(), c);
        }
        p
    }

    pub fn var(v: Var) -> Self {
        let mut p = Poly::zero();
        p.terms.insert(vec![(v, 1)], 1);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, i64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    fn add_term(&mut self, m: Monomial, c: i64) {
        let entry = self.terms.entry(m).or_insert(0);
        *entry += c;
        if *entry == 0 {
            self.terms.retain(|_, c| *c != 0);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn scale(&self, k: i64) -> Poly {
        if k == 0 {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, &c)| (m.clone(), c * k)).collect() }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                out.add_term(mul_monomials(a, b), ca * cb);
            }
        }
        out
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        self.terms.keys().flat_map(|m| m.iter().map(|&(v, _)| v)).collect()
    }

    pub fn derivative(&self, v: Var) -> Poly {
        let mut out = Poly::zero();
        for (m, &c) in &self.terms {
            if let Some(pos) = m.iter().position(|&(w, _)| w == v) {
                let e = m[pos].1;
                let mut dm = m.clone();
                if e == 1 {
                    dm.remove(pos);
                } else {
                    dm[pos].1 = e - 1;
                }
                out.add_term(dm, c * e as i64);
            }
        }
        out
    }

    pub fn eval(&self, point: &impl Fn(Var) -> Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|(m, &c)| {
                m.iter().fold(Complex64::new(c as f64, 0.0), |acc, &(v, e)| acc * point(v).powu(e))
            })
            .sum()
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let sign = if *c < 0 { "-" } else if i > 0 { "+" } else { "" };
            write!(f, "{}{}", sign, if c.abs() != 1 || m.is_empty() { c.abs().to_string() } else { String::new() })?;
            for (k, (v, e)) in m.iter().enumerate() {
                if k > 0 || c.abs() != 1 {
                    f.write_str("*")?;
                }
                if *e == 1 {
                    write!(f, "{v}")?;
                } else {
                    write!(f, "{v}^{e}")?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(u: usize, b: usize) -> Poly {
        Poly::var(Var::H(UserId(u), BsId(b)))
    }

    #[test]
    fn zero_forcing_pair_cancels() {
        // h_a h_b - h_b h_a
        let p = h(5, 0).mul(&h(5, 1)).add(&h(5, 1).mul(&h(5, 0)).scale(-1));
        assert!(p.is_zero());
    }

    #[test]
    fn derivative_and_eval() {
        let x = Var::H(UserId(0), BsId(0));
        let y = Var::H(UserId(0), BsId(1));
        // x^2 y + 3
        let p = Poly::var(x).mul(&Poly::var(x)).mul(&Poly::var(y)).add(&Poly::constant(3));
        let dx = p.derivative(x);
        let pt = |v: Var| if v == x { Complex64::new(2.0, 0.0) } else { Complex64::new(0.0, 1.0) };
        assert_eq!(p.eval(&pt), Complex64::new(3.0, 4.0));
        assert_eq!(dx.eval(&pt), Complex64::new(0.0, 4.0));
        assert_eq!(p.derivative(Var::H(UserId(9), BsId(9))), Poly::zero());
        assert_eq!(p.variables().len(), 2);
    }
}
