//! Collocation with Euler integration on a uniform grid.
//!
//! Decision variables are states and controls at the N+1 uniform points.
//! Dynamics enter as forward-Euler defects
//! `x_{j+1} - x_j - h·f(x_j, u_j, t_j) = 0`, and the running cost uses the
//! matching left-endpoint sum `h·Σ_{j<N} L(x_j, u_j, t_j)`.

use nalgebra::{DMatrix, DVector};

use crate::ocp::{OcpProblem, Provenance, Trajectory};

use super::{
    boundary_jacobian, collocation_bounds, collocation_layout, control_index, dynamics_jacobians,
    state_index, unpack_controls, unpack_states, NlpProblem, TranscriptionError,
};

const FD_STEP: f64 = 1e-7;

fn eval_defects(
    problem: &OcpProblem,
    states: &DMatrix<f64>,
    controls: &DMatrix<f64>,
    tf: f64,
    out: &mut DVector<f64>,
) {
    let nx = problem.state_dim;
    let intervals = states.nrows() - 1;
    let h = (tf - problem.t0) / intervals as f64;
    let mut f = vec![0.0; nx];
    let mut x = vec![0.0; nx];
    let mut u = vec![0.0; problem.control_dim.max(1)];
    for j in 0..intervals {
        for s in 0..nx {
            x[s] = states[(j, s)];
        }
        for c in 0..problem.control_dim {
            u[c] = controls[(j, c)];
        }
        let t = problem.t0 + j as f64 * h;
        (problem.dynamics)(&x, &u[..problem.control_dim], t, &mut f);
        for s in 0..nx {
            out[j * nx + s] = states[(j + 1, s)] - states[(j, s)] - h * f[s];
        }
    }
}

fn objective_value(
    problem: &OcpProblem,
    states: &DMatrix<f64>,
    controls: &DMatrix<f64>,
    tf: f64,
) -> f64 {
    let intervals = states.nrows() - 1;
    let h = (tf - problem.t0) / intervals as f64;
    let mut cost = 0.0;
    if let Some(l) = &problem.bolza_integrand {
        for j in 0..intervals {
            let x: Vec<f64> = states.row(j).iter().copied().collect();
            let u: Vec<f64> = controls.row(j).iter().copied().collect();
            let t = problem.t0 + j as f64 * h;
            cost += h * l(&x, &u, t);
        }
    }
    if let Some(m) = &problem.mayer_cost {
        let xn: Vec<f64> = states.row(intervals).iter().copied().collect();
        cost += m(&xn, tf);
    }
    if cost.is_finite() {
        cost
    } else {
        f64::INFINITY
    }
}

/// Transcribe by Euler collocation on `n` uniform intervals (N+1 points).
pub fn transcribe_euler(problem: &OcpProblem, n: usize) -> Result<NlpProblem, TranscriptionError> {
    problem.validate()?;
    if n < 1 {
        return Err(TranscriptionError::InvalidDiscretization(
            "euler transcription needs at least one interval".into(),
        ));
    }
    let n_nodes = n + 1;
    let nx = problem.state_dim;
    let nu = problem.control_dim;
    let free_tf = problem.horizon.is_free();
    let fractions: Vec<f64> = (0..n_nodes).map(|j| j as f64 / n as f64).collect();
    let defect_rows = n * nx;
    let layout = collocation_layout(nx, nu, n_nodes, free_tf, fractions, defect_rows);
    let (lower, upper) = collocation_bounds(problem, &layout);

    let n0 = problem.initial_constraint.as_ref().map_or(0, |c| c.dim);
    let nf = problem.terminal_constraint.as_ref().map_or(0, |c| c.dim);
    let eq_dim = defect_rows + n0 + nf;

    let eq = {
        let p = problem.clone();
        let layout = layout.clone();
        Box::new(move |z: &[f64]| {
            let states = unpack_states(&layout, z);
            let controls = unpack_controls(&layout, z);
            let tf = layout.tf_value(z, &p.horizon);
            let mut r = DVector::zeros(eq_dim);
            eval_defects(&p, &states, &controls, tf, &mut r);
            let mut row = defect_rows;
            if let Some(bc) = &p.initial_constraint {
                let x0: Vec<f64> = states.row(0).iter().copied().collect();
                for v in (bc.eval)(&x0) {
                    r[row] = v;
                    row += 1;
                }
            }
            if let Some(bc) = &p.terminal_constraint {
                let xn: Vec<f64> = states.row(states.nrows() - 1).iter().copied().collect();
                for v in (bc.eval)(&xn) {
                    r[row] = v;
                    row += 1;
                }
            }
            r
        })
    };

    let eq_jacobian = {
        let p = problem.clone();
        let layout = layout.clone();
        Box::new(move |z: &[f64]| {
            let states = unpack_states(&layout, z);
            let controls = unpack_controls(&layout, z);
            let tf = layout.tf_value(z, &p.horizon);
            let h = (tf - p.t0) / n as f64;
            let mut jac = DMatrix::zeros(eq_dim, layout.n_vars());
            for j in 0..n {
                let x: Vec<f64> = states.row(j).iter().copied().collect();
                let u: Vec<f64> = controls.row(j).iter().copied().collect();
                let t = p.t0 + j as f64 * h;
                let (fx, fu) = dynamics_jacobians(&p, &x, &u, t, FD_STEP);
                for r in 0..nx {
                    jac[(j * nx + r, state_index(&layout, r, j + 1))] = 1.0;
                    jac[(j * nx + r, state_index(&layout, r, j))] -= 1.0;
                    for c in 0..nx {
                        jac[(j * nx + r, state_index(&layout, c, j))] -= h * fx[(r, c)];
                    }
                    for c in 0..nu {
                        jac[(j * nx + r, control_index(&layout, c, j))] = -h * fu[(r, c)];
                    }
                }
            }
            let mut row = defect_rows;
            if let Some(bc) = &p.initial_constraint {
                let x0: Vec<f64> = states.row(0).iter().copied().collect();
                let jb = boundary_jacobian(bc, &x0, FD_STEP);
                for r in 0..bc.dim {
                    for c in 0..nx {
                        jac[(row + r, state_index(&layout, c, 0))] = jb[(r, c)];
                    }
                }
                row += bc.dim;
            }
            if let Some(bc) = &p.terminal_constraint {
                let xn: Vec<f64> = states.row(n_nodes - 1).iter().copied().collect();
                let jb = boundary_jacobian(bc, &xn, FD_STEP);
                for r in 0..bc.dim {
                    for c in 0..nx {
                        jac[(row + r, state_index(&layout, c, n_nodes - 1))] = jb[(r, c)];
                    }
                }
            }
            if let Some(tf_idx) = layout.tf_index() {
                let hstep = FD_STEP * (1.0 + tf.abs());
                let mut plus = DVector::zeros(eq_dim);
                let mut minus = DVector::zeros(eq_dim);
                eval_defects(&p, &states, &controls, tf + hstep, &mut plus);
                eval_defects(&p, &states, &controls, tf - hstep, &mut minus);
                for r in 0..defect_rows {
                    jac[(r, tf_idx)] = (plus[r] - minus[r]) / (2.0 * hstep);
                }
            }
            jac
        })
    };

    let objective = {
        let p = problem.clone();
        let layout = layout.clone();
        Box::new(move |z: &[f64]| {
            let states = unpack_states(&layout, z);
            let controls = unpack_controls(&layout, z);
            let tf = layout.tf_value(z, &p.horizon);
            objective_value(&p, &states, &controls, tf)
        })
    };

    let objective_gradient = {
        let p = problem.clone();
        let layout = layout.clone();
        Box::new(move |z: &[f64]| {
            let states = unpack_states(&layout, z);
            let controls = unpack_controls(&layout, z);
            let tf = layout.tf_value(z, &p.horizon);
            let h = (tf - p.t0) / n as f64;
            let mut grad = DVector::zeros(layout.n_vars());
            if let Some(l) = &p.bolza_integrand {
                for j in 0..n {
                    let t = p.t0 + j as f64 * h;
                    let mut x: Vec<f64> = states.row(j).iter().copied().collect();
                    let mut u: Vec<f64> = controls.row(j).iter().copied().collect();
                    for s in 0..nx {
                        let hs = FD_STEP * (1.0 + x[s].abs());
                        let orig = x[s];
                        x[s] = orig + hs;
                        let fp = l(&x, &u, t);
                        x[s] = orig - hs;
                        let fm = l(&x, &u, t);
                        x[s] = orig;
                        grad[state_index(&layout, s, j)] += h * (fp - fm) / (2.0 * hs);
                    }
                    for c in 0..nu {
                        let hs = FD_STEP * (1.0 + u[c].abs());
                        let orig = u[c];
                        u[c] = orig + hs;
                        let fp = l(&x, &u, t);
                        u[c] = orig - hs;
                        let fm = l(&x, &u, t);
                        u[c] = orig;
                        grad[control_index(&layout, c, j)] += h * (fp - fm) / (2.0 * hs);
                    }
                }
            }
            if let Some(m) = &p.mayer_cost {
                let mut xn: Vec<f64> = states.row(n_nodes - 1).iter().copied().collect();
                for s in 0..nx {
                    let hs = FD_STEP * (1.0 + xn[s].abs());
                    let orig = xn[s];
                    xn[s] = orig + hs;
                    let fp = m(&xn, tf);
                    xn[s] = orig - hs;
                    let fm = m(&xn, tf);
                    xn[s] = orig;
                    grad[state_index(&layout, s, n_nodes - 1)] += (fp - fm) / (2.0 * hs);
                }
            }
            if let Some(tf_idx) = layout.tf_index() {
                let hs = FD_STEP * (1.0 + tf.abs());
                let fp = objective_value(&p, &states, &controls, tf + hs);
                let fm = objective_value(&p, &states, &controls, tf - hs);
                grad[tf_idx] = (fp - fm) / (2.0 * hs);
            }
            grad
        })
    };

    let (ineq_dim, ineq_constraints, ineq_lower, ineq_upper) = match &problem.path_constraint {
        Some(g_con) => {
            let dim = n_nodes * g_con.dim;
            let mut lo = DVector::zeros(dim);
            let mut hi = DVector::zeros(dim);
            for j in 0..n_nodes {
                for i in 0..g_con.dim {
                    lo[j * g_con.dim + i] = g_con.lower[i];
                    hi[j * g_con.dim + i] = g_con.upper[i];
                }
            }
            let p = problem.clone();
            let layout = layout.clone();
            let gdim = g_con.dim;
            let eval: Box<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync> =
                Box::new(move |z: &[f64]| {
                    let states = unpack_states(&layout, z);
                    let controls = unpack_controls(&layout, z);
                    let tf = layout.tf_value(z, &p.horizon);
                    let h = (tf - p.t0) / n as f64;
                    let gc = p.path_constraint.as_ref().unwrap();
                    let mut out = DVector::zeros(dim);
                    for j in 0..n_nodes {
                        let x: Vec<f64> = states.row(j).iter().copied().collect();
                        let u: Vec<f64> = controls.row(j).iter().copied().collect();
                        let t = p.t0 + j as f64 * h;
                        for (i, v) in (gc.eval)(&x, &u, t).into_iter().enumerate() {
                            out[j * gdim + i] = v;
                        }
                    }
                    out
                });
            (dim, Some(eval), lo, hi)
        }
        None => (0, None, DVector::zeros(0), DVector::zeros(0)),
    };

    let recover = {
        let p = problem.clone();
        let layout = layout.clone();
        Box::new(move |z: &[f64]| {
            let states = unpack_states(&layout, z);
            let controls = unpack_controls(&layout, z);
            let tf = layout.tf_value(z, &p.horizon);
            let h = (tf - p.t0) / n as f64;
            let times: Vec<f64> = (0..n_nodes).map(|j| p.t0 + j as f64 * h).collect();
            let cost = objective_value(&p, &states, &controls, tf);
            Ok(Trajectory {
                times,
                states,
                controls,
                cost,
                provenance: Provenance::OptimalPrediction,
            })
        })
    };

    Ok(NlpProblem {
        n_vars: layout.n_vars(),
        objective,
        objective_gradient: Some(objective_gradient),
        objective_hessian_diag: None,
        eq_dim,
        eq_constraints: eq,
        eq_jacobian: Some(eq_jacobian),
        ineq_dim,
        ineq_constraints,
        ineq_jacobian: None,
        ineq_lower,
        ineq_upper,
        lower,
        upper,
        layout,
        recover,
    })
}
