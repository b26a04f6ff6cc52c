//! Finite-difference linearization of dynamics for the linear-MPC baseline.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::ocp::DynamicsFn;

/// Affine model `ẋ = A(x - x₀) + B(u - u₀) + f(x₀, u₀, t₀)`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub offset: Vec<f64>,
    pub x0: Vec<f64>,
    pub u0: Vec<f64>,
}

/// Central-difference Jacobians of the dynamics at `(x0, u0, t0)`.
pub fn linearize(
    dynamics: &DynamicsFn,
    state_dim: usize,
    control_dim: usize,
    x0: &[f64],
    u0: &[f64],
    t0: f64,
) -> LinearModel {
    let h0 = 1e-7;
    let mut offset = vec![0.0; state_dim];
    dynamics(x0, u0, t0, &mut offset);
    let mut a = DMatrix::zeros(state_dim, state_dim);
    let mut b = DMatrix::zeros(state_dim, control_dim);
    let mut plus = vec![0.0; state_dim];
    let mut minus = vec![0.0; state_dim];
    let mut xp = x0.to_vec();
    for c in 0..state_dim {
        let h = h0 * (1.0 + x0[c].abs());
        xp[c] = x0[c] + h;
        dynamics(&xp, u0, t0, &mut plus);
        xp[c] = x0[c] - h;
        dynamics(&xp, u0, t0, &mut minus);
        xp[c] = x0[c];
        for r in 0..state_dim {
            a[(r, c)] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    let mut up = u0.to_vec();
    for c in 0..control_dim {
        let h = h0 * (1.0 + u0[c].abs());
        up[c] = u0[c] + h;
        dynamics(x0, &up, t0, &mut plus);
        up[c] = u0[c] - h;
        dynamics(x0, &up, t0, &mut minus);
        up[c] = u0[c];
        for r in 0..state_dim {
            b[(r, c)] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    LinearModel {
        a,
        b,
        offset,
        x0: x0.to_vec(),
        u0: u0.to_vec(),
    }
}

impl LinearModel {
    /// The affine model as a dynamics callback.
    pub fn as_dynamics(self) -> DynamicsFn {
        Arc::new(move |x: &[f64], u: &[f64], _t: f64, dx: &mut [f64]| {
            for r in 0..self.offset.len() {
                let mut v = self.offset[r];
                for c in 0..self.x0.len() {
                    v += self.a[(r, c)] * (x[c] - self.x0[c]);
                }
                for c in 0..self.u0.len() {
                    v += self.b[(r, c)] * (u[c] - self.u0[c]);
                }
                dx[r] = v;
            }
        })
    }
}
