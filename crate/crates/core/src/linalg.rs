//! Dense complex linear-algebra helpers: tolerance-based rank and scaling.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// Number of singular values above `rel_tol` times the largest one.
pub fn numeric_rank(m: &DMatrix<Complex64>, rel_tol: f64) -> Result<usize> {
    if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0);
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0f64, f64::max);
    if top == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > rel_tol * top).count())
}

/// Rescales columns then rows to unit max-magnitude, a few sweeps.
///
/// Rank is invariant under nonzero row and column scaling, and the monomial
/// columns of an alignment matrix span many orders of magnitude.
pub fn equilibrate(m: &mut DMatrix<Complex64>) {
    for _ in 0..3 {
        for mut col in m.column_iter_mut() {
            let top = col.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if top > 0.0 {
                col.scale_mut(1.0 / top);
            }
        }
        for mut row in m.row_iter_mut() {
            let top = row.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if top > 0.0 {
                row.scale_mut(1.0 / top);
            }
        }
    }
}

/// Largest entry magnitude.
pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_and_outer_product() {
        let id = DMatrix::<Complex64>::identity(5, 5);
        assert_eq!(numeric_rank(&id, DEFAULT_REL_TOL).unwrap(), 5);
        let u = DMatrix::from_column_slice(3, 1, &[c(1.0, 0.5), c(-2.0, 0.0), c(0.3, 1.0)]);
        let v = DMatrix::from_row_slice(1, 4, &[c(1.0, 0.0), c(0.0, 1.0), c(2.0, -1.0), c(0.5, 0.5)]);
        assert_eq!(numeric_rank(&(u * v), DEFAULT_REL_TOL).unwrap(), 1);
        assert_eq!(numeric_rank(&DMatrix::zeros(3, 3), DEFAULT_REL_TOL).unwrap(), 0);
    }

    #[test]
    fn non_finite_rejected() {
        let mut m = DMatrix::<Complex64>::identity(2, 2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert_eq!(numeric_rank(&m, DEFAULT_REL_TOL).unwrap_err(), Error::NonFinite);
    }

    #[test]
    fn equilibration_preserves_rank() {
        let base = DMatrix::from_fn(4, 4, |r, k| c(((r + 1) * (k + 2)) as f64, (r as f64) - (k as f64)));
        let true_rank = numeric_rank(&base, DEFAULT_REL_TOL).unwrap();
        assert_eq!(true_rank, 2);
        let mut m = base.clone();
        m.column_mut(2).scale_mut(1e9);
        m.row_mut(1).scale_mut(1e-7);
        // Bad scaling hides a direction below the tolerance.
        assert!(numeric_rank(&m, DEFAULT_REL_TOL).unwrap() < true_rank);
        equilibrate(&mut m);
        assert_eq!(numeric_rank(&m, DEFAULT_REL_TOL).unwrap(), true_rank);
        assert!((max_abs(&m) - 1.0).abs() < 1e-12);
    }
}
