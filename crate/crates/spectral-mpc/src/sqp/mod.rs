//! Sequential quadratic programming with a damped-BFGS Hessian, an ℓ₁ merit
//! line search, and an active-set QP subproblem.
//!
//! Derivatives come from the problem's callbacks when present and central
//! finite differences otherwise. On an infeasible QP the equalities are
//! relaxed by a quadratic slack penalty (elastic mode) so fault-induced
//! transients degrade gracefully instead of aborting.

pub mod bfgs;
pub(crate) mod dense;
pub mod jacobian;
pub mod qp;

pub use bfgs::bfgs_update;
pub use jacobian::{finite_diff_gradient, finite_diff_jacobian, FiniteDiffError};
pub use qp::{ConstraintId, QpStatus};

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::transcription::NlpProblem;

#[derive(Debug, Error)]
pub enum SqpError {
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error(transparent)]
    FiniteDiff(#[from] FiniteDiffError),
    #[error("invalid solver options: {0}")]
    BadOptions(String),
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub constraint_tolerance: f64,
    pub optimality_tolerance: f64,
    pub finite_difference_step: f64,
    pub merit_penalty_growth: f64,
    pub budget_ms: Option<f64>,
    /// Print one line per iteration to stderr.
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            constraint_tolerance: 1e-6,
            optimality_tolerance: 1e-6,
            finite_difference_step: 1e-7,
            merit_penalty_growth: 2.0,
            budget_ms: None,
            verbose: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SqpError> {
        if self.max_iterations < 1 {
            return Err(SqpError::BadOptions("max_iterations must be >= 1".into()));
        }
        if self.constraint_tolerance <= 0.0
            || self.optimality_tolerance <= 0.0
            || self.finite_difference_step <= 0.0
            || self.merit_penalty_growth <= 1.0
        {
            return Err(SqpError::BadOptions(
                "tolerances and steps must be positive; penalty growth must exceed 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    MaxIterations,
    Infeasible,
    BudgetExceeded,
}

impl SolverStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::MaxIterations => "max-iter",
            SolverStatus::Infeasible => "infeasible",
            SolverStatus::BudgetExceeded => "budget-exceeded",
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub constraint_violation: f64,
    pub step_norm: f64,
    pub merit: f64,
}

#[derive(Debug, Clone)]
pub struct NlpSolution {
    pub z: Vec<f64>,
    pub objective: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    pub constraint_violation: f64,
    pub solve_time_ms: f64,
    pub kkt_residual: f64,
    pub iteration_log: Vec<IterationRecord>,
    /// Merit change of each accepted step (≤ 0 by the line-search contract).
    pub merit_decreases: Vec<f64>,
    /// Final QP active set, usable to warm start a related solve.
    pub active_set: Vec<ConstraintId>,
    /// Final quasi-Newton metric (scaled coordinates), usable to warm start
    /// a related solve.
    pub final_metric: DMatrix<f64>,
}

struct Derivatives {
    objective: f64,
    gradient: DVector<f64>,
    c_eq: DVector<f64>,
    j_eq: DMatrix<f64>,
    c_in: DVector<f64>,
    j_in: Option<DMatrix<f64>>,
}

fn eval_values(nlp: &NlpProblem, z: &[f64]) -> Result<(f64, DVector<f64>, DVector<f64>), SqpError> {
    let f = nlp.eval_objective(z);
    let c_eq = if nlp.eq_dim > 0 {
        nlp.eval_eq(z)
    } else {
        DVector::zeros(0)
    };
    let c_in = match (&nlp.ineq_constraints, nlp.ineq_dim) {
        (Some(g), d) if d > 0 => g(z),
        _ => DVector::zeros(0),
    };
    Ok((f, c_eq, c_in))
}

fn eval_derivatives(nlp: &NlpProblem, z: &[f64], h: f64) -> Result<Derivatives, SqpError> {
    let (objective, c_eq, c_in) = eval_values(nlp, z)?;
    if !objective.is_finite() {
        return Err(SqpError::Evaluation("objective is non-finite".into()));
    }
    if c_eq.iter().any(|v| !v.is_finite()) {
        return Err(SqpError::Evaluation("equality residual is non-finite".into()));
    }
    let gradient = match &nlp.objective_gradient {
        Some(g) => g(z),
        None => finite_diff_gradient(&|zz| nlp.eval_objective(zz), z, h)?,
    };
    let j_eq = if nlp.eq_dim > 0 {
        match &nlp.eq_jacobian {
            Some(j) => j(z),
            None => finite_diff_jacobian(&|zz| nlp.eval_eq(zz), z, h)?,
        }
    } else {
        DMatrix::zeros(0, z.len())
    };
    let j_in = match (&nlp.ineq_constraints, nlp.ineq_dim) {
        (Some(g), d) if d > 0 => Some(match &nlp.ineq_jacobian {
            Some(j) => j(z),
            None => finite_diff_jacobian(&|zz| g(zz), z, h)?,
        }),
        _ => None,
    };
    Ok(Derivatives {
        objective,
        gradient,
        c_eq,
        j_eq,
        c_in,
        j_in,
    })
}

fn violation_one_norm(nlp: &NlpProblem, c_eq: &DVector<f64>, c_in: &DVector<f64>) -> f64 {
    let mut v: f64 = c_eq.iter().map(|x| x.abs()).sum();
    for i in 0..c_in.len() {
        let lo = nlp.ineq_lower[i];
        let hi = nlp.ineq_upper[i];
        if lo.is_finite() {
            v += (lo - c_in[i]).max(0.0);
        }
        if hi.is_finite() {
            v += (c_in[i] - hi).max(0.0);
        }
    }
    v
}

fn violation_inf_norm(nlp: &NlpProblem, c_eq: &DVector<f64>, c_in: &DVector<f64>) -> f64 {
    let mut v = c_eq.amax();
    if c_eq.is_empty() {
        v = 0.0;
    }
    for i in 0..c_in.len() {
        let lo = nlp.ineq_lower[i];
        let hi = nlp.ineq_upper[i];
        if lo.is_finite() {
            v = v.max(lo - c_in[i]);
        }
        if hi.is_finite() {
            v = v.max(c_in[i] - hi);
        }
    }
    v.max(0.0)
}

/// Per-variable scales the solver works in: half the box width for two-sided
/// bounds, otherwise the magnitude of the starting point. Balances curvature
/// across variables measured in different units.
pub fn variable_scales(nlp: &NlpProblem, z0: &[f64]) -> DVector<f64> {
    DVector::from_fn(nlp.n_vars, |i, _| {
        let lo = nlp.lower[i];
        let hi = nlp.upper[i];
        let s = if lo.is_finite() && hi.is_finite() && hi > lo {
            0.5 * (hi - lo)
        } else {
            1.0 + z0[i].abs()
        };
        s.clamp(1e-2, 1e6)
    })
}

/// Stationarity residual of the Lagrangian in scaled coordinates, with bound
/// multipliers absorbed by projection: at an active lower bound a positive
/// reduced gradient is optimal, at an upper bound a negative one.
pub fn projected_stationarity(
    nlp: &NlpProblem,
    z: &[f64],
    gradient: &DVector<f64>,
    j_eq: &DMatrix<f64>,
    lambda: &DVector<f64>,
    j_in: Option<&DMatrix<f64>>,
    mu_signed: &DVector<f64>,
    scales: &DVector<f64>,
) -> f64 {
    let mut r = gradient.clone();
    if lambda.len() > 0 {
        r -= j_eq.transpose() * lambda;
    }
    if let Some(j) = j_in {
        if mu_signed.len() > 0 {
            r -= j.transpose() * mu_signed;
        }
    }
    let bound_tol = 1e-9;
    let mut worst = 0.0f64;
    for i in 0..z.len() {
        let at_lower = nlp.lower[i].is_finite()
            && z[i] - nlp.lower[i] <= bound_tol * (1.0 + nlp.lower[i].abs());
        let at_upper = nlp.upper[i].is_finite()
            && nlp.upper[i] - z[i] <= bound_tol * (1.0 + nlp.upper[i].abs());
        let ri = r[i] * scales[i];
        let v = if at_lower && at_upper {
            0.0
        } else if at_lower {
            (-ri).max(0.0)
        } else if at_upper {
            ri.max(0.0)
        } else {
            ri.abs()
        };
        worst = worst.max(v);
    }
    worst
}

fn scale_columns(m: &DMatrix<f64>, scales: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for c in 0..out.ncols() {
        let s = scales[c];
        for r in 0..out.nrows() {
            out[(r, c)] *= s;
        }
    }
    out
}

fn clip(z: &mut [f64], lower: &DVector<f64>, upper: &DVector<f64>) {
    for i in 0..z.len() {
        z[i] = z[i].max(lower[i]).min(upper[i]);
    }
}

/// Solve from `z0` with an empty QP warm-start seed.
pub fn solve(nlp: &NlpProblem, z0: &[f64], opts: &SolverOptions) -> Result<NlpSolution, SqpError> {
    solve_with_metric(nlp, z0, &[], None, opts)
}

/// Solve from `z0`, seeding the first QP working set (e.g. with the active
/// set of the previous MPC sample).
pub fn solve_warm(
    nlp: &NlpProblem,
    z0: &[f64],
    seed: &[ConstraintId],
    opts: &SolverOptions,
) -> Result<NlpSolution, SqpError> {
    solve_with_metric(nlp, z0, seed, None, opts)
}

/// [`solve_warm`] with an explicit initial quasi-Newton metric (in the
/// solver's scaled coordinates), e.g. the final metric of the previous MPC
/// sample's solve.
pub fn solve_with_metric(
    nlp: &NlpProblem,
    z0: &[f64],
    seed: &[ConstraintId],
    initial_metric: Option<&DMatrix<f64>>,
    opts: &SolverOptions,
) -> Result<NlpSolution, SqpError> {
    opts.validate()?;
    if z0.len() != nlp.n_vars {
        return Err(SqpError::Evaluation(format!(
            "initial point has {} entries, expected {}",
            z0.len(),
            nlp.n_vars
        )));
    }
    let start = Instant::now();
    let n = nlp.n_vars;
    let mut z = z0.to_vec();
    clip(&mut z, &nlp.lower, &nlp.upper);

    let fd = opts.finite_difference_step;
    let mut d = eval_derivatives(nlp, &z, fd)?;
    // The QP, the BFGS metric, and the optimality measure all live in
    // bound-scaled coordinates z̃ = z ./ scales.
    let scales = variable_scales(nlp, &z);
    // Seed the metric: a carried-over metric wins, then the objective's
    // diagonal curvature when the problem supplies it; an identity start on
    // a strongly curved tracking cost makes the first subproblems wildly
    // overstep.
    let (mut h_mat, mut h_needs_scaling) = match (initial_metric, &nlp.objective_hessian_diag) {
        (Some(h0), _) if h0.nrows() == n => (h0.clone(), false),
        (_, Some(hd)) => {
            let raw = hd(&z);
            let scaled: Vec<f64> = (0..n).map(|i| raw[i] * scales[i] * scales[i]).collect();
            let top = scaled.iter().fold(0.0f64, |a, v| a.max(*v));
            if top > 0.0 {
                let floor = 1e-6 * top;
                let mut h = DMatrix::zeros(n, n);
                for i in 0..n {
                    h[(i, i)] = scaled[i].clamp(floor, top);
                }
                (h, false)
            } else {
                (DMatrix::identity(n, n), true)
            }
        }
        _ => (DMatrix::identity(n, n), true),
    };
    let mut nu_penalty: f64 = 10.0;
    let mut iteration_log = Vec::new();
    let mut merit_decreases = Vec::new();
    let mut active_seed: Vec<ConstraintId> = seed.to_vec();
    let mut status = SolverStatus::MaxIterations;
    let mut iterations = 0;
    let mut kkt_final = f64::INFINITY;
    // Step-length continuation: start each search near the last accepted
    // step so a curvature-poor Hessian cannot force repeated deep cuts.
    let mut alpha_start = 1.0f64;

    for iter in 0..opts.max_iterations {
        iterations = iter + 1;
        if let Some(budget) = opts.budget_ms {
            if start.elapsed().as_secs_f64() * 1e3 > budget {
                status = SolverStatus::BudgetExceeded;
                iterations = iter;
                break;
            }
        }

        // QP data in scaled step coordinates p̃ = (z_new - z) ./ scales.
        let b_eq = -&d.c_eq;
        let g_s = DVector::from_fn(n, |i, _| d.gradient[i] * scales[i]);
        let j_eq_s = scale_columns(&d.j_eq, &scales);
        let j_in_s = d.j_in.as_ref().map(|j| scale_columns(j, &scales));
        let lb_p = DVector::from_fn(n, |i, _| (nlp.lower[i] - z[i]) / scales[i]);
        let ub_p = DVector::from_fn(n, |i, _| (nlp.upper[i] - z[i]) / scales[i]);
        let (in_lo, in_hi) = if d.c_in.len() > 0 {
            (
                DVector::from_fn(d.c_in.len(), |i, _| nlp.ineq_lower[i] - d.c_in[i]),
                DVector::from_fn(d.c_in.len(), |i, _| nlp.ineq_upper[i] - d.c_in[i]),
            )
        } else {
            (DVector::zeros(0), DVector::zeros(0))
        };

        let qp_input = qp::QpInput {
            hessian: &h_mat,
            gradient: &g_s,
            eq_matrix: &j_eq_s,
            eq_rhs: &b_eq,
            ineq_matrix: j_in_s.as_ref(),
            ineq_lower: &in_lo,
            ineq_upper: &in_hi,
            lower: &lb_p,
            upper: &ub_p,
        };
        let mut qp_sol = qp::solve(&qp_input, &active_seed);
        let mut lambda = qp_sol.eq_multipliers.clone();

        // An iteration-limited QP still returns a working-set-feasible step;
        // only a genuinely inconsistent subproblem goes elastic.
        if qp_sol.status == QpStatus::Infeasible {
            // Elastic relaxation: quadratic slack penalty on the equalities,
            // bounds and inequalities kept hard.
            let gamma = 1e6;
            let jt = j_eq_s.transpose();
            let h_el = &h_mat + gamma * (&jt * &j_eq_s);
            let g_el = &g_s + gamma * (&jt * &d.c_eq);
            let empty_m = DMatrix::zeros(0, n);
            let empty_v = DVector::zeros(0);
            let elastic_input = qp::QpInput {
                hessian: &h_el,
                gradient: &g_el,
                eq_matrix: &empty_m,
                eq_rhs: &empty_v,
                ineq_matrix: j_in_s.as_ref(),
                ineq_lower: &in_lo,
                ineq_upper: &in_hi,
                lower: &lb_p,
                upper: &ub_p,
            };
            let elastic_sol = qp::solve(&elastic_input, &active_seed);
            if elastic_sol.status != QpStatus::Solved {
                status = SolverStatus::Infeasible;
                break;
            }
            lambda = -gamma * (&j_eq_s * &elastic_sol.step + &d.c_eq);
            qp_sol = elastic_sol;
        }
        // Back to original coordinates for the line search.
        let p = DVector::from_fn(n, |i, _| qp_sol.step[i] * scales[i]);
        active_seed = qp_sol.active.iter().map(|(id, _)| *id).collect();

        // Signed multipliers for the general inequality rows.
        let mu_signed = if let Some(j) = &d.j_in {
            let mut mu = DVector::zeros(j.nrows());
            for (id, m) in &qp_sol.active {
                match id {
                    ConstraintId::IneqLower(r) => mu[*r] += m,
                    ConstraintId::IneqUpper(r) => mu[*r] -= m,
                    _ => {}
                }
            }
            mu
        } else {
            DVector::zeros(0)
        };

        let viol_inf = violation_inf_norm(nlp, &d.c_eq, &d.c_in);
        let kkt = projected_stationarity(
            nlp,
            &z,
            &d.gradient,
            &d.j_eq,
            &lambda,
            d.j_in.as_ref(),
            &mu_signed,
            &scales,
        );
        kkt_final = kkt;
        let grad_scale = 1.0 + g_s.amax();
        if viol_inf <= opts.constraint_tolerance && kkt <= opts.optimality_tolerance * grad_scale {
            status = SolverStatus::Optimal;
            iterations = iter;
            break;
        }

        // Merit penalty keeps pace with the multipliers, and relaxes when it
        // overshot them badly (a stale huge penalty starves the line search).
        let mult_max = lambda
            .iter()
            .map(|v| v.abs())
            .chain(qp_sol.active.iter().map(|(_, m)| m.abs()))
            .fold(0.0f64, f64::max);
        let required = 1.1 * mult_max + 1e-3;
        if nu_penalty < required {
            nu_penalty = required.max(nu_penalty * opts.merit_penalty_growth);
        } else if nu_penalty > 5.0 * required {
            // Multiplier spikes early in a solve leave the penalty far above
            // what dual feasibility needs; decay it geometrically.
            nu_penalty = (nu_penalty * 0.2).max(2.0 * required);
        }

        let viol1 = violation_one_norm(nlp, &d.c_eq, &d.c_in);
        let merit0 = d.objective + nu_penalty * viol1;
        let descent = d.gradient.dot(&p) - nu_penalty * viol1;
        let descent_neg = descent.min(0.0);

        let try_point = |z_trial: &[f64], alpha: f64| -> Option<(Vec<f64>, f64)> {
            let (f_t, ce_t, ci_t) = eval_values(nlp, z_trial).ok()?;
            if !f_t.is_finite() || ce_t.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let merit_t = f_t + nu_penalty * violation_one_norm(nlp, &ce_t, &ci_t);
            if merit_t <= merit0 + 1e-4 * alpha * descent_neg {
                Some((z_trial.to_vec(), merit_t))
            } else {
                None
            }
        };

        let mut alpha = alpha_start;
        let mut accepted = None;
        for trial in 0..40 {
            let mut z_trial: Vec<f64> = z.iter().zip(p.iter()).map(|(a, b)| a + alpha * b).collect();
            clip(&mut z_trial, &nlp.lower, &nlp.upper);
            if let Some(hit) = try_point(&z_trial, alpha) {
                accepted = Some(hit);
                break;
            }
            // Second-order correction: the full step often raises the ℓ1
            // merit only through constraint curvature (Maratos effect).
            // Re-solve the QP for a correction that cancels the residual at
            // the trial point before shrinking the step.
            if trial == 0 && nlp.eq_dim > 0 && nlp.ineq_dim == 0 {
                let c_trial = nlp.eval_eq(&z_trial);
                if c_trial.iter().all(|v| v.is_finite()) {
                    let soc_rhs = -&c_trial;
                    let g_soc = &g_s + &h_mat * &qp_sol.step;
                    let lb_soc =
                        DVector::from_fn(n, |i, _| (nlp.lower[i] - z_trial[i]) / scales[i]);
                    let ub_soc =
                        DVector::from_fn(n, |i, _| (nlp.upper[i] - z_trial[i]) / scales[i]);
                    let none_m = DVector::zeros(0);
                    let soc_input = qp::QpInput {
                        hessian: &h_mat,
                        gradient: &g_soc,
                        eq_matrix: &j_eq_s,
                        eq_rhs: &soc_rhs,
                        ineq_matrix: None,
                        ineq_lower: &none_m,
                        ineq_upper: &none_m,
                        lower: &lb_soc,
                        upper: &ub_soc,
                    };
                    let soc = qp::solve(&soc_input, &active_seed);
                    if soc.status == QpStatus::Solved {
                        let mut z_soc: Vec<f64> = z_trial
                            .iter()
                            .enumerate()
                            .map(|(i, a)| a + soc.step[i] * scales[i])
                            .collect();
                        clip(&mut z_soc, &nlp.lower, &nlp.upper);
                        if let Some(hit) = try_point(&z_soc, alpha) {
                            accepted = Some(hit);
                            break;
                        }
                    }
                }
            }
            alpha *= 0.5;
        }

        if opts.verbose {
            eprintln!(
                "sqp it {iter:4} f {:.9e} viol {viol_inf:.3e} kkt {kkt:.3e} |p| {:.3e} alpha {alpha:.3e} nu {nu_penalty:.3e} qp_it {}",
                d.objective,
                p.amax(),
                qp_sol.iterations,
            );
        }

        let (z_new, merit_new) = match accepted {
            Some(v) => v,
            None => {
                // No merit progress along the QP direction.
                if viol_inf <= opts.constraint_tolerance
                    && kkt <= 10.0 * opts.optimality_tolerance * grad_scale
                {
                    status = SolverStatus::Optimal;
                } else {
                    status = SolverStatus::MaxIterations;
                }
                iterations = iter;
                break;
            }
        };

        alpha_start = (alpha * 2.0).min(1.0);

        let step: DVector<f64> =
            DVector::from_iterator(n, z_new.iter().zip(z.iter()).map(|(a, b)| a - b));
        let d_new = eval_derivatives(nlp, &z_new, fd)?;

        // Damped BFGS on the Lagrangian gradient difference.
        let grad_l_old = {
            let mut gl = d.gradient.clone();
            if lambda.len() > 0 {
                gl -= d.j_eq.transpose() * &lambda;
            }
            if let (Some(j), true) = (&d.j_in, mu_signed.len() > 0) {
                gl -= j.transpose() * &mu_signed;
            }
            gl
        };
        let grad_l_new = {
            let mut gl = d_new.gradient.clone();
            if lambda.len() > 0 {
                gl -= d_new.j_eq.transpose() * &lambda;
            }
            if let (Some(j), true) = (&d_new.j_in, mu_signed.len() > 0) {
                gl -= j.transpose() * &mu_signed;
            }
            gl
        };
        let y = grad_l_new - grad_l_old;
        // The BFGS pair in scaled coordinates: s̃ = s ./ scales, ỹ = y .* scales.
        let step_s = DVector::from_fn(n, |i, _| step[i] / scales[i]);
        let y_s = DVector::from_fn(n, |i, _| y[i] * scales[i]);
        if alpha < 1e-8 {
            // A collapsed line search means the curvature model is badly
            // wrong along this direction; start the metric over.
            h_mat = DMatrix::identity(n, n);
            h_needs_scaling = true;
        } else {
            // Shanno-Phua: size the initial metric from the first genuine
            // curvature sample before applying updates.
            if h_needs_scaling {
                let sy = step_s.dot(&y_s);
                if sy > 0.0 {
                    let scale = (y_s.dot(&y_s) / sy).clamp(1e-6, 1e8);
                    h_mat = DMatrix::identity(n, n) * scale;
                }
                h_needs_scaling = false;
            }
            h_mat = bfgs_update(&h_mat, &step_s, &y_s);
        }

        merit_decreases.push(merit_new - merit0);
        d = d_new;
        z = z_new;
        iteration_log.push(IterationRecord {
            iteration: iter,
            objective: d.objective,
            constraint_violation: violation_inf_norm(nlp, &d.c_eq, &d.c_in),
            step_norm: step.amax(),
            merit: merit_new,
        });
    }

    let constraint_violation = violation_inf_norm(nlp, &d.c_eq, &d.c_in);
    if status == SolverStatus::Optimal && constraint_violation > opts.constraint_tolerance {
        status = SolverStatus::MaxIterations;
    }
    Ok(NlpSolution {
        z,
        objective: d.objective,
        status,
        iterations,
        constraint_violation,
        solve_time_ms: start.elapsed().as_secs_f64() * 1e3,
        kkt_residual: kkt_final,
        iteration_log,
        merit_decreases,
        active_set: active_seed,
        final_metric: h_mat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcription::{LayoutStructure, VariableLayout};
    use approx::assert_relative_eq;

    fn bare_layout(n: usize) -> VariableLayout {
        VariableLayout::new(
            0,
            n,
            1,
            false,
            LayoutStructure::SingleShooting { rollout_steps: 0 },
            Vec::new(),
            vec![0.0],
            (0..n)
                .map(|i| crate::transcription::VarKind::Control { control: i, node: 0 })
                .collect(),
        )
    }

    fn unconstrained(
        n: usize,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> NlpProblem {
        NlpProblem {
            n_vars: n,
            objective: Box::new(f),
            objective_gradient: None,
            objective_hessian_diag: None,
            eq_dim: 0,
            eq_constraints: Box::new(|_| DVector::zeros(0)),
            eq_jacobian: None,
            ineq_dim: 0,
            ineq_constraints: None,
            ineq_jacobian: None,
            ineq_lower: DVector::zeros(0),
            ineq_upper: DVector::zeros(0),
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
            layout: bare_layout(n),
            recover: Box::new(|_| unreachable!("no trajectory for a bare NLP")),
        }
    }

    #[test]
    fn scalar_quadratic() {
        let nlp = unconstrained(1, |z| (z[0] - 1.0) * (z[0] - 1.0));
        let sol = solve(&nlp, &[0.0], &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        assert_relative_eq!(sol.z[0], 1.0, epsilon = 1e-6);
        assert!(sol.objective < 1e-10);
    }

    #[test]
    fn bound_constrained_quadratic_reports_active_bound() {
        let mut nlp = unconstrained(1, |z| z[0] * z[0]);
        nlp.lower[0] = 1.0;
        let sol = solve(&nlp, &[0.0], &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        assert_relative_eq!(sol.z[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(sol.objective, 1.0, epsilon = 1e-9);
        assert!(sol.active_set.contains(&ConstraintId::BoundLower(0)));
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let nlp = unconstrained(2, |z| {
            let a = 1.0 - z[0];
            let b = z[1] - z[0] * z[0];
            a * a + 100.0 * b * b
        });
        let t = std::time::Instant::now();
        let sol = solve(&nlp, &[-1.2, 1.0], &SolverOptions::default()).unwrap();
        assert!(t.elapsed().as_secs_f64() < 1.0, "took {:?}", t.elapsed());
        assert_eq!(sol.status, SolverStatus::Optimal);
        assert_relative_eq!(sol.z[0], 1.0, epsilon = 1e-5);
        assert_relative_eq!(sol.z[1], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn equality_constrained_projection() {
        // min ½‖z‖² s.t. z_0 + z_1 = 2 → (1, 1).
        let mut nlp = unconstrained(2, |z| 0.5 * (z[0] * z[0] + z[1] * z[1]));
        nlp.eq_dim = 1;
        nlp.eq_constraints = Box::new(|z| DVector::from_vec(vec![z[0] + z[1] - 2.0]));
        let sol = solve(&nlp, &[5.0, -3.0], &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        assert_relative_eq!(sol.z[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(sol.z[1], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn nonlinear_equality_circle() {
        // min z_0 + z_1 s.t. z_0² + z_1² = 2 → (-1, -1).
        let mut nlp = unconstrained(2, |z| z[0] + z[1]);
        nlp.eq_dim = 1;
        nlp.eq_constraints =
            Box::new(|z| DVector::from_vec(vec![z[0] * z[0] + z[1] * z[1] - 2.0]));
        let sol = solve(&nlp, &[1.5, 0.2], &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        assert_relative_eq!(sol.z[0], -1.0, epsilon = 1e-5);
        assert_relative_eq!(sol.z[1], -1.0, epsilon = 1e-5);
    }

    #[test]
    fn merit_is_monotone_over_accepted_steps() {
        let nlp = unconstrained(2, |z| {
            let a = 1.0 - z[0];
            let b = z[1] - z[0] * z[0];
            a * a + 100.0 * b * b
        });
        let sol = solve(&nlp, &[-1.2, 1.0], &SolverOptions::default()).unwrap();
        for d in &sol.merit_decreases {
            assert!(*d <= 1e-10, "merit increased by {d}");
        }
    }

    #[test]
    fn kkt_residual_small_at_optimum() {
        let mut nlp = unconstrained(2, |z| (z[0] - 3.0).powi(2) + (z[1] + 1.0).powi(2));
        nlp.upper[0] = 2.0;
        let opts = SolverOptions::default();
        let sol = solve(&nlp, &[0.0, 0.0], &opts).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        assert_relative_eq!(sol.z[0], 2.0, epsilon = 1e-8);
        assert_relative_eq!(sol.z[1], -1.0, epsilon = 1e-6);
        assert!(sol.kkt_residual <= 10.0 * opts.optimality_tolerance * 10.0);
    }

    #[test]
    fn infeasible_problem_reported() {
        // z = 0 and z = 1 simultaneously.
        let mut nlp = unconstrained(1, |z| z[0] * z[0]);
        nlp.eq_dim = 2;
        nlp.eq_constraints = Box::new(|z| DVector::from_vec(vec![z[0], z[0] - 1.0]));
        let sol = solve(&nlp, &[0.5], &SolverOptions::default()).unwrap();
        // Elastic mode finds the least-squares compromise but the violation
        // cannot reach tolerance.
        assert_ne!(sol.status, SolverStatus::Optimal);
        assert!(sol.constraint_violation > 0.1);
    }

    #[test]
    fn deterministic_iterate_sequence() {
        let make = || {
            let mut nlp = unconstrained(2, |z| {
                (1.0 - z[0]).powi(2) + 100.0 * (z[1] - z[0] * z[0]).powi(2)
            });
            nlp.lower[1] = -0.5;
            nlp
        };
        let a = solve(&make(), &[-1.2, 1.0], &SolverOptions::default()).unwrap();
        let b = solve(&make(), &[-1.2, 1.0], &SolverOptions::default()).unwrap();
        assert_eq!(a.z, b.z);
        assert_eq!(a.iteration_log.len(), b.iteration_log.len());
        for (ra, rb) in a.iteration_log.iter().zip(&b.iteration_log) {
            assert_eq!(ra.objective.to_bits(), rb.objective.to_bits());
            assert_eq!(ra.merit.to_bits(), rb.merit.to_bits());
        }
    }

    #[test]
    fn budget_exceeded_status() {
        let nlp = unconstrained(2, |z| {
            let a = 1.0 - z[0];
            let b = z[1] - z[0] * z[0];
            a * a + 100.0 * b * b
        });
        let opts = SolverOptions {
            budget_ms: Some(0.0),
            ..Default::default()
        };
        let sol = solve(&nlp, &[-1.2, 1.0], &opts).unwrap();
        assert_eq!(sol.status, SolverStatus::BudgetExceeded);
    }
}
