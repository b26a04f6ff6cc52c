//! Pseudospectral transcription on a Legendre-Gauss-Lobatto grid.
//!
//! Decision variables are the states and controls at all N+1 nodes (plus the
//! final time when free). The dynamics enter as defect equalities
//! `(tf-t0)/2 · f(x_j, u_j, t_j) - (D·X)_j = 0` at every node, where D is the
//! spectral differentiation matrix.

use nalgebra::{DMatrix, DVector};

use crate::collocation::CollocationGrid;
use crate::ocp::{evaluate_cost_with_horizon, OcpProblem, Provenance, Trajectory};

use super::{
    boundary_jacobian, collocation_bounds, collocation_layout, control_index, dynamics_jacobians,
    state_index, unpack_controls, unpack_states, NlpProblem, TranscriptionError,
};

const FD_STEP: f64 = 1e-7;

// Defect rows are scaled by the quadrature weights: the differentiation
// matrix has O(N²) corner rows and w_j ∝ 1/N² evens the row norms, which the
// multiplier estimates and merit penalty depend on. The weights are strictly
// positive so the constraint set is unchanged.
fn eval_defects(
    problem: &OcpProblem,
    grid: &CollocationGrid,
    states: &DMatrix<f64>,
    controls: &DMatrix<f64>,
    tf: f64,
    out: &mut DVector<f64>,
) {
    let nx = problem.state_dim;
    let n_nodes = grid.len();
    let t0 = problem.t0;
    let scale = 0.5 * (tf - t0);
    let dx_nodes = grid.diff_matrix() * states;
    let mut f = vec![0.0; nx];
    let mut x = vec![0.0; nx];
    let mut u = vec![0.0; problem.control_dim.max(1)];
    for j in 0..n_nodes {
        for s in 0..nx {
            x[s] = states[(j, s)];
        }
        for c in 0..problem.control_dim {
            u[c] = controls[(j, c)];
        }
        let t = t0 + scale * (grid.nodes()[j] + 1.0);
        (problem.dynamics)(&x, &u[..problem.control_dim], t, &mut f);
        let w = grid.weights()[j];
        for s in 0..nx {
            out[j * nx + s] = w * (scale * f[s] - dx_nodes[(j, s)]);
        }
    }
}

/// Transcribe by pseudospectral collocation with polynomial order `n`.
pub fn transcribe_pseudospectral(
    problem: &OcpProblem,
    n: usize,
) -> Result<NlpProblem, TranscriptionError> {
    problem.validate()?;
    let grid = CollocationGrid::new(n)?;
    let n_nodes = grid.len();
    let nx = problem.state_dim;
    let nu = problem.control_dim;
    let free_tf = problem.horizon.is_free();
    let fractions: Vec<f64> = grid.nodes().iter().map(|tau| 0.5 * (tau + 1.0)).collect();
    let defect_rows = n_nodes * nx;
    let layout = collocation_layout(nx, nu, n_nodes, free_tf, fractions, defect_rows);
    let (lower, upper) = collocation_bounds(problem, &layout);

    let n0 = problem.initial_constraint.as_ref().map_or(0, |c| c.dim);
    let nf = problem.terminal_constraint.as_ref().map_or(0, |c| c.dim);
    let eq_dim = defect_rows + n0 + nf;

    let eq = {
        let p = problem.clone();
        let g = grid.clone();
        let layout = layout.clone();
        Box::new(move |z: &[f64]| {
            let states = unpack_states(&layout, z);
            let controls = unpack_controls(&layout, z);
            let tf = layout.tf_value(z, &p.horizon);
            let mut r = DVector::zeros(eq_dim);
            eval_defects(&p, &g, &states, &controls, tf, &mut r);
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

    // Structured Jacobian: the D·X term is linear and entered exactly; the
    // dynamics and boundary blocks use nodewise central differences.
    let eq_jacobian = {
        let p = problem.clone();
        let g = grid.clone();
        let layout = layout.clone();
        Box::new(move |z: &[f64]| {
            let states = unpack_states(&layout, z);
            let controls = unpack_controls(&layout, z);
            let tf = layout.tf_value(z, &p.horizon);
            let t0 = p.t0;
            let scale = 0.5 * (tf - t0);
            let d = g.diff_matrix();
            let mut jac = DMatrix::zeros(eq_dim, layout.n_vars());
            for k in 0..n_nodes {
                let w = g.weights()[k];
                for j in 0..n_nodes {
                    let dkj = d[(k, j)];
                    if dkj != 0.0 {
                        for s in 0..nx {
                            jac[(k * nx + s, state_index(&layout, s, j))] = -w * dkj;
                        }
                    }
                }
            }
            for j in 0..n_nodes {
                let x: Vec<f64> = states.row(j).iter().copied().collect();
                let u: Vec<f64> = controls.row(j).iter().copied().collect();
                let t = t0 + scale * (g.nodes()[j] + 1.0);
                let (fx, fu) = dynamics_jacobians(&p, &x, &u, t, FD_STEP);
                let w = g.weights()[j];
                for r in 0..nx {
                    for c in 0..nx {
                        jac[(j * nx + r, state_index(&layout, c, j))] += w * scale * fx[(r, c)];
                    }
                    for c in 0..nu {
                        jac[(j * nx + r, control_index(&layout, c, j))] += w * scale * fu[(r, c)];
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
                let h = FD_STEP * (1.0 + tf.abs());
                let mut plus = DVector::zeros(eq_dim);
                let mut minus = DVector::zeros(eq_dim);
                eval_defects(&p, &g, &states, &controls, tf + h, &mut plus);
                eval_defects(&p, &g, &states, &controls, tf - h, &mut minus);
                for r in 0..defect_rows {
                    jac[(r, tf_idx)] = (plus[r] - minus[r]) / (2.0 * h);
                }
            }
            jac
        })
    };

    let objective = {
        let p = problem.clone();
        let g = grid.clone();
        let layout = layout.clone();
        Box::new(move |z: &[f64]| {
            let states = unpack_states(&layout, z);
            let controls = unpack_controls(&layout, z);
            let tf = layout.tf_value(z, &p.horizon);
            evaluate_cost_with_horizon(&p, &g, &states, &controls, p.t0, tf)
                .unwrap_or(f64::INFINITY)
        })
    };

    let objective_gradient = {
        let p = problem.clone();
        let g = grid.clone();
        let layout = layout.clone();
        Box::new(move |z: &[f64]| {
            let states = unpack_states(&layout, z);
            let controls = unpack_controls(&layout, z);
            let tf = layout.tf_value(z, &p.horizon);
            let t0 = p.t0;
            let scale = 0.5 * (tf - t0);
            let mut grad = DVector::zeros(layout.n_vars());
            if let Some(l) = &p.bolza_integrand {
                for j in 0..n_nodes {
                    let w = g.weights()[j];
                    let t = t0 + scale * (g.nodes()[j] + 1.0);
                    let mut x: Vec<f64> = states.row(j).iter().copied().collect();
                    let mut u: Vec<f64> = controls.row(j).iter().copied().collect();
                    for s in 0..nx {
                        let h = FD_STEP * (1.0 + x[s].abs());
                        let orig = x[s];
                        x[s] = orig + h;
                        let fp = l(&x, &u, t);
                        x[s] = orig - h;
                        let fm = l(&x, &u, t);
                        x[s] = orig;
                        grad[state_index(&layout, s, j)] += scale * w * (fp - fm) / (2.0 * h);
                    }
                    for c in 0..nu {
                        let h = FD_STEP * (1.0 + u[c].abs());
                        let orig = u[c];
                        u[c] = orig + h;
                        let fp = l(&x, &u, t);
                        u[c] = orig - h;
                        let fm = l(&x, &u, t);
                        u[c] = orig;
                        grad[control_index(&layout, c, j)] += scale * w * (fp - fm) / (2.0 * h);
                    }
                }
            }
            if let Some(m) = &p.mayer_cost {
                let mut xn: Vec<f64> = states.row(n_nodes - 1).iter().copied().collect();
                for s in 0..nx {
                    let h = FD_STEP * (1.0 + xn[s].abs());
                    let orig = xn[s];
                    xn[s] = orig + h;
                    let fp = m(&xn, tf);
                    xn[s] = orig - h;
                    let fm = m(&xn, tf);
                    xn[s] = orig;
                    grad[state_index(&layout, s, n_nodes - 1)] += (fp - fm) / (2.0 * h);
                }
            }
            if let Some(tf_idx) = layout.tf_index() {
                let h = FD_STEP * (1.0 + tf.abs());
                let fp = evaluate_cost_with_horizon(&p, &g, &states, &controls, t0, tf + h)
                    .unwrap_or(f64::INFINITY);
                let fm = evaluate_cost_with_horizon(&p, &g, &states, &controls, t0, tf - h)
                    .unwrap_or(f64::INFINITY);
                grad[tf_idx] = (fp - fm) / (2.0 * h);
            }
            grad
        })
    };

    // Nodewise second differences of the running cost and Mayer term; the
    // integrand couples variables only within a node, so the diagonal is
    // cheap and captures the tracking-cost curvature exactly.
    let objective_hessian_diag = {
        let p = problem.clone();
        let g = grid.clone();
        let layout = layout.clone();
        Box::new(move |z: &[f64]| {
            let states = unpack_states(&layout, z);
            let controls = unpack_controls(&layout, z);
            let tf = layout.tf_value(z, &p.horizon);
            let t0 = p.t0;
            let scale = 0.5 * (tf - t0);
            let mut diag = DVector::zeros(layout.n_vars());
            if let Some(l) = &p.bolza_integrand {
                for j in 0..n_nodes {
                    let w = g.weights()[j];
                    let t = t0 + scale * (g.nodes()[j] + 1.0);
                    let mut x: Vec<f64> = states.row(j).iter().copied().collect();
                    let mut u: Vec<f64> = controls.row(j).iter().copied().collect();
                    let base = l(&x, &u, t);
                    for s in 0..nx {
                        let h = 1e-4 * (1.0 + x[s].abs());
                        let orig = x[s];
                        x[s] = orig + h;
                        let fp = l(&x, &u, t);
                        x[s] = orig - h;
                        let fm = l(&x, &u, t);
                        x[s] = orig;
                        diag[state_index(&layout, s, j)] +=
                            scale * w * (fp - 2.0 * base + fm) / (h * h);
                    }
                    for c in 0..nu {
                        let h = 1e-4 * (1.0 + u[c].abs());
                        let orig = u[c];
                        u[c] = orig + h;
                        let fp = l(&x, &u, t);
                        u[c] = orig - h;
                        let fm = l(&x, &u, t);
                        u[c] = orig;
                        diag[control_index(&layout, c, j)] +=
                            scale * w * (fp - 2.0 * base + fm) / (h * h);
                    }
                }
            }
            if let Some(m) = &p.mayer_cost {
                let mut xn: Vec<f64> = states.row(n_nodes - 1).iter().copied().collect();
                let base = m(&xn, tf);
                for s in 0..nx {
                    let h = 1e-4 * (1.0 + xn[s].abs());
                    let orig = xn[s];
                    xn[s] = orig + h;
                    let fp = m(&xn, tf);
                    xn[s] = orig - h;
                    let fm = m(&xn, tf);
                    xn[s] = orig;
                    diag[state_index(&layout, s, n_nodes - 1)] +=
                        (fp - 2.0 * base + fm) / (h * h);
                }
            }
            diag
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
            let g = grid.clone();
            let layout = layout.clone();
            let gdim = g_con.dim;
            let eval: Box<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync> =
                Box::new(move |z: &[f64]| {
                    let states = unpack_states(&layout, z);
                    let controls = unpack_controls(&layout, z);
                    let tf = layout.tf_value(z, &p.horizon);
                    let scale = 0.5 * (tf - p.t0);
                    let gc = p.path_constraint.as_ref().unwrap();
                    let mut out = DVector::zeros(dim);
                    for j in 0..g.len() {
                        let x: Vec<f64> = states.row(j).iter().copied().collect();
                        let u: Vec<f64> = controls.row(j).iter().copied().collect();
                        let t = p.t0 + scale * (g.nodes()[j] + 1.0);
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
        let g = grid.clone();
        let layout = layout.clone();
        Box::new(move |z: &[f64]| {
            let states = unpack_states(&layout, z);
            let controls = unpack_controls(&layout, z);
            let tf = layout.tf_value(z, &p.horizon);
            let times: Vec<f64> = g
                .nodes()
                .iter()
                .map(|tau| p.t0 + 0.5 * (tau + 1.0) * (tf - p.t0))
                .collect();
            let cost = evaluate_cost_with_horizon(&p, &g, &states, &controls, p.t0, tf)
                .map_err(TranscriptionError::Ocp)?;
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
        objective_hessian_diag: Some(objective_hessian_diag),
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::brachistochrone::{self, BrachParams};
    use crate::ocp::Horizon;
    use crate::transcription::{default_initial_guess, recover_trajectory};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn brachistochrone_layout_counts() {
        let problem = brachistochrone::ocp(&BrachParams::default());
        let nlp = transcribe_pseudospectral(&problem, 50).unwrap();
        assert_eq!(nlp.n_vars, 51 * 4 + 1);
        match nlp.layout.structure {
            super::super::LayoutStructure::Collocation { defect_rows } => {
                assert_eq!(defect_rows, 51 * 3)
            }
            _ => panic!("expected collocation layout"),
        }
        // 153 defects + 3 initial + 1 terminal.
        assert_eq!(nlp.eq_dim, 153 + 4);
        nlp.layout.validate().unwrap();
    }

    #[test]
    fn constant_state_zero_dynamics_has_zero_defects() {
        let mut p = crate::ocp::OcpProblem::new(
            2,
            1,
            Arc::new(|_x: &[f64], _u: &[f64], _t, dx: &mut [f64]| dx.fill(0.0)),
        );
        p.horizon = Horizon::Fixed(3.0);
        let nlp = transcribe_pseudospectral(&p, 8).unwrap();
        let mut z = vec![0.0; nlp.n_vars];
        for (i, kind) in nlp.layout.entries().iter().enumerate() {
            if matches!(kind, super::super::VarKind::State { .. }) {
                z[i] = 4.2;
            }
        }
        let r = nlp.eval_eq(&z);
        assert!(r.amax() < 1e-12);
    }

    #[test]
    fn recover_times_unscale_nodes() {
        let mut p = crate::ocp::OcpProblem::new(
            1,
            1,
            Arc::new(|_x: &[f64], _u: &[f64], _t, dx: &mut [f64]| dx.fill(0.0)),
        );
        p.horizon = Horizon::Fixed(4.0);
        let nlp = transcribe_pseudospectral(&p, 2).unwrap();
        let z = vec![0.0; nlp.n_vars];
        let traj = recover_trajectory(&nlp, &z).unwrap();
        assert_eq!(traj.times, vec![0.0, 2.0, 4.0]);
    }

    #[test]
    fn pack_unpack_roundtrip() {
        let problem = brachistochrone::ocp(&BrachParams::default());
        let nlp = transcribe_pseudospectral(&problem, 6).unwrap();
        let z = default_initial_guess(&problem, &nlp.layout);
        let states = unpack_states(&nlp.layout, &z);
        let controls = unpack_controls(&nlp.layout, &z);
        for j in 0..nlp.layout.n_nodes {
            for s in 0..3 {
                assert_eq!(states[(j, s)], z[state_index(&nlp.layout, s, j)]);
            }
            assert_eq!(controls[(j, 0)], z[control_index(&nlp.layout, 0, j)]);
        }
    }

    #[test]
    fn structured_jacobian_matches_dense_fd() {
        let problem = brachistochrone::ocp(&BrachParams::default());
        let nlp = transcribe_pseudospectral(&problem, 4).unwrap();
        let mut z = default_initial_guess(&problem, &nlp.layout);
        for (i, v) in z.iter_mut().enumerate() {
            *v += 0.01 * ((i % 7) as f64 - 3.0);
        }
        let jac = (nlp.eq_jacobian.as_ref().unwrap())(&z);
        let dense = crate::sqp::finite_diff_jacobian(
            &|zz| nlp.eval_eq(zz),
            &z,
            1e-6,
        )
        .unwrap();
        assert_eq!(jac.nrows(), dense.nrows());
        for r in 0..jac.nrows() {
            for c in 0..jac.ncols() {
                assert_relative_eq!(jac[(r, c)], dense[(r, c)], epsilon = 1e-4, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn objective_gradient_matches_dense_fd() {
        let problem = brachistochrone::ocp(&BrachParams::default());
        let nlp = transcribe_pseudospectral(&problem, 4).unwrap();
        let mut z = default_initial_guess(&problem, &nlp.layout);
        for (i, v) in z.iter_mut().enumerate() {
            *v += 0.02 * ((i % 5) as f64 - 2.0);
        }
        let grad = (nlp.objective_gradient.as_ref().unwrap())(&z);
        let dense = crate::sqp::finite_diff_gradient(&|zz| nlp.eval_objective(zz), &z, 1e-6)
            .unwrap();
        for i in 0..grad.len() {
            assert_relative_eq!(grad[i], dense[i], epsilon = 1e-5, max_relative = 1e-5);
        }
    }
}
