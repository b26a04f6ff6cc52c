//! Central finite-difference derivatives, column at a time.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FiniteDiffError {
    #[error("non-finite value while probing column {column}")]
    NonFiniteProbe { column: usize },
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
}

/// Central-difference Jacobian of a vector function.
///
/// The step for column `c` is `h·(1 + |z_c|)`; columns are probed in index
/// order so the result is deterministic.
pub fn finite_diff_jacobian(
    f: &dyn Fn(&[f64]) -> DVector<f64>,
    z: &[f64],
    h: f64,
) -> Result<DMatrix<f64>, FiniteDiffError> {
    if h <= 0.0 {
        return Err(FiniteDiffError::InvalidStep(h));
    }
    let n = z.len();
    let mut zp = z.to_vec();
    let mut jac: Option<DMatrix<f64>> = None;
    for c in 0..n {
        let step = h * (1.0 + z[c].abs());
        zp[c] = z[c] + step;
        let plus = f(&zp);
        zp[c] = z[c] - step;
        let minus = f(&zp);
        zp[c] = z[c];
        if plus.iter().chain(minus.iter()).any(|v| !v.is_finite()) {
            return Err(FiniteDiffError::NonFiniteProbe { column: c });
        }
        let col = (plus - minus) / (2.0 * step);
        let j = jac.get_or_insert_with(|| DMatrix::zeros(col.len(), n));
        j.column_mut(c).copy_from(&col);
    }
    Ok(jac.unwrap_or_else(|| DMatrix::zeros(f(z).len(), 0)))
}

/// Central-difference gradient of a scalar function.
pub fn finite_diff_gradient(
    f: &dyn Fn(&[f64]) -> f64,
    z: &[f64],
    h: f64,
) -> Result<DVector<f64>, FiniteDiffError> {
    if h <= 0.0 {
        return Err(FiniteDiffError::InvalidStep(h));
    }
    let n = z.len();
    let mut zp = z.to_vec();
    let mut grad = DVector::zeros(n);
    for c in 0..n {
        let step = h * (1.0 + z[c].abs());
        zp[c] = z[c] + step;
        let plus = f(&zp);
        zp[c] = z[c] - step;
        let minus = f(&zp);
        zp[c] = z[c];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(FiniteDiffError::NonFiniteProbe { column: c });
        }
        grad[c] = (plus - minus) / (2.0 * step);
    }
    Ok(grad)
}
