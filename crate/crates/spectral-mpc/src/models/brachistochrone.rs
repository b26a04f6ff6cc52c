//! Brachistochrone bead: minimum-time descent along a wire under uniform
//! gravity, with the analytic cycloid solution as reference.
//!
//! State is `[x_b, y_b, V]` (horizontal displacement, vertical displacement
//! positive down, bead speed); the control is the wire angle θ measured from
//! the vertical.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::ocp::{BoundaryConstraint, Horizon, MayerFn, OcpProblem};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BrachParams {
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
    /// Demanded final horizontal displacement, m.
    pub target_x: f64,
}

impl Default for BrachParams {
    fn default() -> Self {
        Self {
            gravity: 1.0,
            target_x: 0.5,
        }
    }
}

/// Bead equations of motion: ẋ_b = V sinθ, ẏ_b = V cosθ, V̇ = g cosθ.
pub fn dynamics(state: &[f64], theta: f64, params: &BrachParams) -> [f64; 3] {
    let v = state[2];
    let (sin_t, cos_t) = theta.sin_cos();
    [v * sin_t, v * cos_t, params.gravity * cos_t]
}

/// Cycloid frequency ω = sqrt(πg / x_f).
pub fn cycloid_frequency(target_x: f64, gravity: f64) -> Result<f64, ModelError> {
    if target_x <= 0.0 || gravity <= 0.0 {
        return Err(ModelError::InvalidParameter(format!(
            "target_x and gravity must be positive (got {target_x}, {gravity})"
        )));
    }
    Ok((PI * gravity / target_x).sqrt())
}

/// Analytic bead position at time `t`:
/// x_b = g/ω²(ωt - sin ωt), y_b = g/ω²(1 - cos ωt).
pub fn analytic_position(t: f64, target_x: f64, gravity: f64) -> Result<(f64, f64), ModelError> {
    let omega = cycloid_frequency(target_x, gravity)?;
    let a = gravity / (omega * omega);
    let wt = omega * t;
    Ok((a * (wt - wt.sin()), a * (1.0 - wt.cos())))
}

/// Minimum time to reach the target displacement: t_f = π/ω.
pub fn analytic_final_time(target_x: f64, gravity: f64) -> Result<f64, ModelError> {
    Ok(PI / cycloid_frequency(target_x, gravity)?)
}

/// The minimum-time optimal control problem: min t_f from rest at the origin
/// to x_b(t_f) = x_f.
pub fn ocp(params: &BrachParams) -> OcpProblem {
    let p = *params;
    let mut problem = OcpProblem::new(
        3,
        1,
        Arc::new(move |x: &[f64], u: &[f64], _t, dx: &mut [f64]| {
            let d = dynamics(x, u[0], &p);
            dx.copy_from_slice(&d);
        }),
    );
    let mayer: MayerFn = Arc::new(|_xf, tf| tf);
    problem.mayer_cost = Some(mayer);
    problem.initial_constraint = Some(BoundaryConstraint::fix_state(&[0.0, 0.0, 0.0]));
    problem.terminal_constraint = Some(BoundaryConstraint::fix_components(&[(0, p.target_x)]));
    problem.control_lower = vec![-PI / 2.0];
    problem.control_upper = vec![PI];
    problem.t0 = 0.0;
    problem.horizon = Horizon::Free {
        min: 0.5,
        max: 10.0,
    };
    problem.initial_state_hint = vec![0.0, 0.0, 0.0];
    problem.terminal_state_hint = vec![Some(p.target_x), Some(p.target_x), Some(1.0)];
    problem
}
