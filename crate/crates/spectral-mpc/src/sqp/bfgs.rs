//! Damped BFGS update of the Lagrangian Hessian approximation.

use nalgebra::{DMatrix, DVector};

/// Rank-2 BFGS update with Powell damping.
///
/// When the curvature `sᵀy` falls below `0.2·sᵀHs`, `y` is blended toward
/// `Hs` so the updated matrix stays positive definite. A zero step returns
/// `h` unchanged.
pub fn bfgs_update(h: &DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
    let s_norm = s.norm();
    if s_norm == 0.0 {
        return h.clone();
    }
    let hs = h * s;
    let s_h_s = s.dot(&hs);
    if s_h_s <= 0.0 || !s_h_s.is_finite() {
        return h.clone();
    }
    let s_y = s.dot(y);
    let y_eff = if s_y < 0.2 * s_h_s {
        let theta = 0.8 * s_h_s / (s_h_s - s_y);
        y * theta + &hs * (1.0 - theta)
    } else {
        y.clone()
    };
    let s_y_eff = s.dot(&y_eff);
    if s_y_eff <= 0.0 || !s_y_eff.is_finite() {
        return h.clone();
    }
    let mut out = h.clone();
    // H - (Hs)(Hs)ᵀ/sᵀHs + y yᵀ/sᵀy
    out.ger(-1.0 / s_h_s, &hs, &hs, 1.0);
    out.ger(1.0 / s_y_eff, &y_eff, &y_eff, 1.0);
    out
}
