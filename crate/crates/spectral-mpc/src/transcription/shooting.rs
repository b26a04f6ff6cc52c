//! Direct single and multiple shooting.
//!
//! Single shooting optimizes control values at `n_u` uniform points (plus a
//! free final time); the dynamics are handled by one fixed-step RK4 rollout
//! of `n_x` steps with controls interpolated between the control points. The
//! terminal constraint applies to the rollout endpoint; state box and path
//! constraints are sampled at the integration points.
//!
//! Multiple shooting splits the horizon into `m` segments, adds each
//! segment's initial state to the decision vector, and stitches segments with
//! matching equalities `end(k) - start(k+1) = 0`.

use nalgebra::{DMatrix, DVector};

use crate::integrate::rk4_step;
use crate::ocp::{OcpProblem, Provenance, Trajectory};

use super::{LayoutStructure, NlpProblem, TranscriptionError, VarKind, VariableLayout};

/// How controls vary between control points inside a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlInterp {
    #[default]
    PiecewiseLinear,
    ZeroOrderHold,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ShootingOptions {
    pub control_interp: ControlInterp,
}

/// States beyond this magnitude mark a diverged rollout; the remainder is
/// frozen at a large finite value so merit-based line searches back off.
const DIVERGENCE_LIMIT: f64 = 1e8;

struct ControlSchedule<'a> {
    values: &'a [f64],
    n_u: usize,
    n_points: usize,
    t_start: f64,
    t_end: f64,
    interp: ControlInterp,
}

impl ControlSchedule<'_> {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let span = self.t_end - self.t_start;
        let frac = ((t - self.t_start) / span).clamp(0.0, 1.0);
        let pos = frac * (self.n_points - 1) as f64;
        let k = (pos.floor() as usize).min(self.n_points - 2);
        let alpha = match self.interp {
            ControlInterp::PiecewiseLinear => pos - k as f64,
            ControlInterp::ZeroOrderHold => 0.0,
        };
        for c in 0..self.n_u {
            let a = self.values[k * self.n_u + c];
            let b = self.values[(k + 1) * self.n_u + c];
            out[c] = (1.0 - alpha) * a + alpha * b;
        }
    }
}

/// RK4 rollout with interpolated controls. Returns (states, diverged).
fn rollout(
    problem: &OcpProblem,
    x0: &[f64],
    schedule: &ControlSchedule,
    t_start: f64,
    t_end: f64,
    steps: usize,
) -> (DMatrix<f64>, bool) {
    let nx = problem.state_dim;
    let nu = problem.control_dim;
    let mut states = DMatrix::zeros(steps + 1, nx);
    let mut x = x0.to_vec();
    for (s, v) in x.iter().enumerate() {
        states[(0, s)] = *v;
    }
    let h = (t_end - t_start) / steps as f64;
    let mut diverged = false;
    let dynamics = &problem.dynamics;
    let f = |t: f64, xs: &[f64], dx: &mut [f64]| {
        let mut u = vec![0.0; nu];
        schedule.eval(t, &mut u);
        dynamics(xs, &u, t, dx);
    };
    for k in 0..steps {
        if !diverged {
            rk4_step(&f, t_start + k as f64 * h, &mut x, h);
            if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
                diverged = true;
                for v in x.iter_mut() {
                    *v = if v.is_finite() {
                        v.clamp(-DIVERGENCE_LIMIT, DIVERGENCE_LIMIT)
                    } else {
                        DIVERGENCE_LIMIT
                    };
                }
            }
        }
        for s in 0..nx {
            states[(k + 1, s)] = x[s];
        }
    }
    (states, diverged)
}

/// Running-cost integral along a rollout (trapezoidal over the sample points)
/// plus the Mayer term.
fn rollout_cost(
    problem: &OcpProblem,
    states: &DMatrix<f64>,
    times: &[f64],
    controls: &DMatrix<f64>,
    tf: f64,
) -> f64 {
    let mut cost = 0.0;
    if let Some(l) = &problem.bolza_integrand {
        let mut values = Vec::with_capacity(times.len());
        for (j, &t) in times.iter().enumerate() {
            let x: Vec<f64> = states.row(j).iter().copied().collect();
            let u: Vec<f64> = controls.row(j).iter().copied().collect();
            values.push(l(&x, &u, t));
        }
        for j in 0..times.len() - 1 {
            cost += 0.5 * (values[j] + values[j + 1]) * (times[j + 1] - times[j]);
        }
    }
    if let Some(m) = &problem.mayer_cost {
        let xn: Vec<f64> = states.row(states.nrows() - 1).iter().copied().collect();
        cost += m(&xn, tf);
    }
    if cost.is_finite() {
        cost
    } else {
        f64::INFINITY
    }
}

fn initial_state_checked(problem: &OcpProblem) -> Result<Vec<f64>, TranscriptionError> {
    let x0 = problem.initial_state_hint.clone();
    if let Some(bc) = &problem.initial_constraint {
        let residual = (bc.eval)(&x0)
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        if residual > 1e-8 {
            return Err(TranscriptionError::InconsistentInitialState { residual });
        }
    }
    Ok(x0)
}

/// Indices of states carrying at least one finite box bound.
fn bounded_states(problem: &OcpProblem) -> Vec<usize> {
    (0..problem.state_dim)
        .filter(|&s| problem.state_lower[s].is_finite() || problem.state_upper[s].is_finite())
        .collect()
}

/// Transcribe by direct single shooting with `n_u` control points and `n_x`
/// integration steps.
pub fn transcribe_single_shooting(
    problem: &OcpProblem,
    n_u: usize,
    n_x: usize,
    options: ShootingOptions,
) -> Result<NlpProblem, TranscriptionError> {
    problem.validate()?;
    if n_u < 2 {
        return Err(TranscriptionError::InvalidDiscretization(
            "single shooting needs at least 2 control points".into(),
        ));
    }
    if n_x < n_u {
        return Err(TranscriptionError::InvalidDiscretization(format!(
            "integration steps ({n_x}) must be at least the control point count ({n_u})"
        )));
    }
    let x0 = initial_state_checked(problem)?;
    let nx = problem.state_dim;
    let nu = problem.control_dim;
    let free_tf = problem.horizon.is_free();

    let mut entries = Vec::new();
    for node in 0..n_u {
        for control in 0..nu {
            entries.push(VarKind::Control { control, node });
        }
    }
    if free_tf {
        entries.push(VarKind::FinalTime);
    }
    let control_fractions: Vec<f64> = (0..n_u).map(|j| j as f64 / (n_u - 1) as f64).collect();
    let layout = VariableLayout::new(
        nx,
        nu,
        n_u,
        free_tf,
        LayoutStructure::SingleShooting { rollout_steps: n_x },
        Vec::new(),
        control_fractions,
        entries,
    );

    let n = layout.n_vars();
    let mut lower = DVector::from_element(n, f64::NEG_INFINITY);
    let mut upper = DVector::from_element(n, f64::INFINITY);
    for (idx, kind) in layout.entries().iter().enumerate() {
        match *kind {
            VarKind::Control { control, .. } => {
                lower[idx] = problem.control_lower[control];
                upper[idx] = problem.control_upper[control];
            }
            VarKind::FinalTime => {
                if let crate::ocp::Horizon::Free { min, max } = problem.horizon {
                    lower[idx] = min;
                    upper[idx] = max;
                }
            }
            VarKind::State { .. } => unreachable!(),
        }
    }

    let run = {
        let p = problem.clone();
        let x0 = x0.clone();
        let interp = options.control_interp;
        move |z: &[f64]| -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>, bool, f64) {
            let tf = layout_tf(z, &p, n_u * nu);
            let schedule = ControlSchedule {
                values: &z[..n_u * nu],
                n_u: nu,
                n_points: n_u,
                t_start: p.t0,
                t_end: tf,
                interp,
            };
            let (states, diverged) = rollout(&p, &x0, &schedule, p.t0, tf, n_x);
            let times: Vec<f64> = (0..=n_x)
                .map(|k| p.t0 + k as f64 * (tf - p.t0) / n_x as f64)
                .collect();
            let mut controls = DMatrix::zeros(n_x + 1, nu);
            let mut u = vec![0.0; nu];
            for (k, &t) in times.iter().enumerate() {
                schedule.eval(t, &mut u);
                for c in 0..nu {
                    controls[(k, c)] = u[c];
                }
            }
            (times, states, controls, diverged, tf)
        }
    };

    let nf = problem.terminal_constraint.as_ref().map_or(0, |c| c.dim);
    let eq_dim = nf;
    let eq = {
        let p = problem.clone();
        let run = run.clone();
        Box::new(move |z: &[f64]| {
            let (_, states, _, _, _) = run(z);
            let mut r = DVector::zeros(eq_dim);
            if let Some(bc) = &p.terminal_constraint {
                let xn: Vec<f64> = states.row(states.nrows() - 1).iter().copied().collect();
                for (i, v) in (bc.eval)(&xn).into_iter().enumerate() {
                    r[i] = v;
                }
            }
            r
        })
    };

    let objective = {
        let p = problem.clone();
        let run = run.clone();
        Box::new(move |z: &[f64]| {
            let (times, states, controls, diverged, tf) = run(z);
            if diverged {
                return f64::INFINITY;
            }
            rollout_cost(&p, &states, &times, &controls, tf)
        })
    };

    let bounded = bounded_states(problem);
    let gdim = problem.path_constraint.as_ref().map_or(0, |g| g.dim);
    let per_point = bounded.len() + gdim;
    let ineq_dim = (n_x + 1) * per_point;
    let (ineq_constraints, ineq_lower, ineq_upper) = if per_point > 0 {
        let mut lo = DVector::zeros(ineq_dim);
        let mut hi = DVector::zeros(ineq_dim);
        for k in 0..=n_x {
            for (i, &s) in bounded.iter().enumerate() {
                lo[k * per_point + i] = problem.state_lower[s];
                hi[k * per_point + i] = problem.state_upper[s];
            }
            if let Some(g) = &problem.path_constraint {
                for i in 0..gdim {
                    lo[k * per_point + bounded.len() + i] = g.lower[i];
                    hi[k * per_point + bounded.len() + i] = g.upper[i];
                }
            }
        }
        let p = problem.clone();
        let run = run.clone();
        let bounded = bounded.clone();
        let eval: Box<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync> = Box::new(move |z: &[f64]| {
            let (times, states, controls, _, _) = run(z);
            let mut out = DVector::zeros(ineq_dim);
            for (k, &t) in times.iter().enumerate() {
                for (i, &s) in bounded.iter().enumerate() {
                    out[k * per_point + i] = states[(k, s)];
                }
                if let Some(g) = &p.path_constraint {
                    let x: Vec<f64> = states.row(k).iter().copied().collect();
                    let u: Vec<f64> = controls.row(k).iter().copied().collect();
                    for (i, v) in (g.eval)(&x, &u, t).into_iter().enumerate() {
                        out[k * per_point + bounded.len() + i] = v;
                    }
                }
            }
            out
        });
        (Some(eval), lo, hi)
    } else {
        (None, DVector::zeros(0), DVector::zeros(0))
    };

    let recover = {
        let p = problem.clone();
        let run = run.clone();
        Box::new(move |z: &[f64]| {
            let (times, states, controls, diverged, tf) = run(z);
            if diverged {
                return Err(TranscriptionError::DivergedRollout { segment: 0 });
            }
            let cost = rollout_cost(&p, &states, &times, &controls, tf);
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
        n_vars: n,
        objective,
        objective_gradient: None,
        objective_hessian_diag: None,
        eq_dim,
        eq_constraints: eq,
        eq_jacobian: None,
        ineq_dim: if per_point > 0 { ineq_dim } else { 0 },
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

fn layout_tf(z: &[f64], problem: &OcpProblem, tf_slot: usize) -> f64 {
    match problem.horizon {
        crate::ocp::Horizon::Fixed(tf) => tf,
        crate::ocp::Horizon::Free { .. } => z[tf_slot],
    }
}

/// Transcribe by direct multiple shooting: `m` segments, `n_u` control points
/// per segment, `n_x` total integration steps split across segments.
pub fn transcribe_multiple_shooting(
    problem: &OcpProblem,
    m: usize,
    n_u: usize,
    n_x: usize,
    options: ShootingOptions,
) -> Result<NlpProblem, TranscriptionError> {
    problem.validate()?;
    if m < 2 {
        return Err(TranscriptionError::InvalidDiscretization(
            "multiple shooting needs at least 2 segments".into(),
        ));
    }
    if n_u < 2 {
        return Err(TranscriptionError::InvalidDiscretization(
            "multiple shooting needs at least 2 control points per segment".into(),
        ));
    }
    let steps_per_segment = (n_x / m).max(n_u);
    let nx = problem.state_dim;
    let nu = problem.control_dim;
    let free_tf = problem.horizon.is_free();

    let mut entries = Vec::new();
    for node in 0..m {
        for state in 0..nx {
            entries.push(VarKind::State { state, node });
        }
    }
    for node in 0..m * n_u {
        for control in 0..nu {
            entries.push(VarKind::Control { control, node });
        }
    }
    if free_tf {
        entries.push(VarKind::FinalTime);
    }
    let state_fractions: Vec<f64> = (0..m).map(|k| k as f64 / m as f64).collect();
    let control_fractions: Vec<f64> = (0..m * n_u)
        .map(|g| {
            let k = g / n_u;
            let j = g % n_u;
            (k as f64 + j as f64 / (n_u - 1) as f64) / m as f64
        })
        .collect();
    let matching_rows = (m - 1) * nx;
    let layout = VariableLayout::new(
        nx,
        nu,
        m,
        free_tf,
        LayoutStructure::MultipleShooting {
            segments: m,
            points_per_segment: n_u,
            matching_rows,
        },
        state_fractions,
        control_fractions,
        entries,
    );

    let n = layout.n_vars();
    let mut lower = DVector::from_element(n, f64::NEG_INFINITY);
    let mut upper = DVector::from_element(n, f64::INFINITY);
    for (idx, kind) in layout.entries().iter().enumerate() {
        match *kind {
            VarKind::State { state, .. } => {
                lower[idx] = problem.state_lower[state];
                upper[idx] = problem.state_upper[state];
            }
            VarKind::Control { control, .. } => {
                lower[idx] = problem.control_lower[control];
                upper[idx] = problem.control_upper[control];
            }
            VarKind::FinalTime => {
                if let crate::ocp::Horizon::Free { min, max } = problem.horizon {
                    lower[idx] = min;
                    upper[idx] = max;
                }
            }
        }
    }

    let control_block = m * n_u * nu;
    let tf_slot = m * nx + control_block;

    // Rollout of all segments; returns per-segment state histories.
    let run = {
        let p = problem.clone();
        let interp = options.control_interp;
        move |z: &[f64]| -> (Vec<DMatrix<f64>>, Vec<usize>, f64) {
            let tf = match p.horizon {
                crate::ocp::Horizon::Fixed(tf) => tf,
                crate::ocp::Horizon::Free { .. } => z[tf_slot],
            };
            let seg_len = (tf - p.t0) / m as f64;
            let mut segs = Vec::with_capacity(m);
            let mut diverged = Vec::new();
            for k in 0..m {
                let t_start = p.t0 + k as f64 * seg_len;
                let t_end = t_start + seg_len;
                let x0: Vec<f64> = (0..nx).map(|s| z[k * nx + s]).collect();
                let values = &z[m * nx + k * n_u * nu..m * nx + (k + 1) * n_u * nu];
                let schedule = ControlSchedule {
                    values,
                    n_u: nu,
                    n_points: n_u,
                    t_start,
                    t_end,
                    interp,
                };
                let (states, div) = rollout(&p, &x0, &schedule, t_start, t_end, steps_per_segment);
                if div {
                    diverged.push(k);
                }
                segs.push(states);
            }
            (segs, diverged, tf)
        }
    };

    let n0 = problem.initial_constraint.as_ref().map_or(0, |c| c.dim);
    let nf = problem.terminal_constraint.as_ref().map_or(0, |c| c.dim);
    let eq_dim = n0 + matching_rows + nf;

    let eq = {
        let p = problem.clone();
        let run = run.clone();
        Box::new(move |z: &[f64]| {
            let (segs, _, _) = run(z);
            let mut r = DVector::zeros(eq_dim);
            let mut row = 0;
            if let Some(bc) = &p.initial_constraint {
                let s0: Vec<f64> = (0..nx).map(|s| z[s]).collect();
                for v in (bc.eval)(&s0) {
                    r[row] = v;
                    row += 1;
                }
            }
            for k in 0..m - 1 {
                let end = segs[k].nrows() - 1;
                for s in 0..nx {
                    r[row] = segs[k][(end, s)] - z[(k + 1) * nx + s];
                    row += 1;
                }
            }
            if let Some(bc) = &p.terminal_constraint {
                let last = &segs[m - 1];
                let xn: Vec<f64> = last.row(last.nrows() - 1).iter().copied().collect();
                for v in (bc.eval)(&xn) {
                    r[row] = v;
                    row += 1;
                }
            }
            r
        })
    };

    let objective = {
        let p = problem.clone();
        let run = run.clone();
        Box::new(move |z: &[f64]| {
            let (segs, diverged, tf) = run(z);
            if !diverged.is_empty() {
                return f64::INFINITY;
            }
            let seg_len = (tf - p.t0) / m as f64;
            let mut cost = 0.0;
            if let Some(l) = &p.bolza_integrand {
                for (k, seg) in segs.iter().enumerate() {
                    let t_start = p.t0 + k as f64 * seg_len;
                    let steps = seg.nrows() - 1;
                    let h = seg_len / steps as f64;
                    let values = &z[m * nx + k * n_u * nu..m * nx + (k + 1) * n_u * nu];
                    let schedule = ControlSchedule {
                        values,
                        n_u: nu,
                        n_points: n_u,
                        t_start,
                        t_end: t_start + seg_len,
                        interp: options.control_interp,
                    };
                    let mut u = vec![0.0; nu];
                    let mut prev = 0.0;
                    for j in 0..=steps {
                        let t = t_start + j as f64 * h;
                        schedule.eval(t, &mut u);
                        let x: Vec<f64> = seg.row(j).iter().copied().collect();
                        let v = l(&x, &u, t);
                        if j > 0 {
                            cost += 0.5 * (prev + v) * h;
                        }
                        prev = v;
                    }
                }
            }
            if let Some(mc) = &p.mayer_cost {
                let last = &segs[m - 1];
                let xn: Vec<f64> = last.row(last.nrows() - 1).iter().copied().collect();
                cost += mc(&xn, tf);
            }
            if cost.is_finite() {
                cost
            } else {
                f64::INFINITY
            }
        })
    };

    let bounded = bounded_states(problem);
    let gdim = problem.path_constraint.as_ref().map_or(0, |g| g.dim);
    let per_point = bounded.len() + gdim;
    let points_total = m * (steps_per_segment + 1);
    let ineq_dim = points_total * per_point;
    let (ineq_constraints, ineq_lower, ineq_upper) = if per_point > 0 {
        let mut lo = DVector::zeros(ineq_dim);
        let mut hi = DVector::zeros(ineq_dim);
        for k in 0..points_total {
            for (i, &s) in bounded.iter().enumerate() {
                lo[k * per_point + i] = problem.state_lower[s];
                hi[k * per_point + i] = problem.state_upper[s];
            }
            if let Some(g) = &problem.path_constraint {
                for i in 0..gdim {
                    lo[k * per_point + bounded.len() + i] = g.lower[i];
                    hi[k * per_point + bounded.len() + i] = g.upper[i];
                }
            }
        }
        let p = problem.clone();
        let run = run.clone();
        let bounded = bounded.clone();
        let eval: Box<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync> = Box::new(move |z: &[f64]| {
            let (segs, _, tf) = run(z);
            let seg_len = (tf - p.t0) / m as f64;
            let mut out = DVector::zeros(ineq_dim);
            let mut point = 0;
            for (k, seg) in segs.iter().enumerate() {
                let steps = seg.nrows() - 1;
                let h = seg_len / steps as f64;
                for j in 0..=steps {
                    for (i, &s) in bounded.iter().enumerate() {
                        out[point * per_point + i] = seg[(j, s)];
                    }
                    if let Some(g) = &p.path_constraint {
                        let t = p.t0 + k as f64 * seg_len + j as f64 * h;
                        let x: Vec<f64> = seg.row(j).iter().copied().collect();
                        let u = vec![0.0; nu];
                        for (i, v) in (g.eval)(&x, &u, t).into_iter().enumerate() {
                            out[point * per_point + bounded.len() + i] = v;
                        }
                    }
                    point += 1;
                }
            }
            out
        });
        (Some(eval), lo, hi)
    } else {
        (None, DVector::zeros(0), DVector::zeros(0))
    };

    let recover = {
        let p = problem.clone();
        let run = run.clone();
        let interp = options.control_interp;
        Box::new(move |z: &[f64]| {
            let (segs, diverged, tf) = run(z);
            if let Some(&segment) = diverged.first() {
                return Err(TranscriptionError::DivergedRollout { segment });
            }
            let seg_len = (tf - p.t0) / m as f64;
            let mut times = Vec::new();
            let mut state_rows: Vec<Vec<f64>> = Vec::new();
            let mut control_rows: Vec<Vec<f64>> = Vec::new();
            let mut u = vec![0.0; nu];
            for (k, seg) in segs.iter().enumerate() {
                let steps = seg.nrows() - 1;
                let t_start = p.t0 + k as f64 * seg_len;
                let h = seg_len / steps as f64;
                let values = &z[m * nx + k * n_u * nu..m * nx + (k + 1) * n_u * nu];
                let schedule = ControlSchedule {
                    values,
                    n_u: nu,
                    n_points: n_u,
                    t_start,
                    t_end: t_start + seg_len,
                    interp,
                };
                let first = if k == 0 { 0 } else { 1 };
                for j in first..=steps {
                    let t = t_start + j as f64 * h;
                    times.push(t);
                    state_rows.push(seg.row(j).iter().copied().collect());
                    schedule.eval(t, &mut u);
                    control_rows.push(u.clone());
                }
            }
            let n_rows = times.len();
            let states = DMatrix::from_fn(n_rows, nx, |r, c| state_rows[r][c]);
            let controls = DMatrix::from_fn(n_rows, nu, |r, c| control_rows[r][c]);
            let cost = (objective_for_recover(&p))(z, &segs, tf, m, n_u, nu, interp);
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
        n_vars: n,
        objective,
        objective_gradient: None,
        objective_hessian_diag: None,
        eq_dim,
        eq_constraints: eq,
        eq_jacobian: None,
        ineq_dim: if per_point > 0 { ineq_dim } else { 0 },
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

// Cost recomputation used by multiple-shooting recovery; mirrors the
// objective closure but reuses already-computed segments.
fn objective_for_recover(
    p: &OcpProblem,
) -> impl Fn(&[f64], &[DMatrix<f64>], f64, usize, usize, usize, ControlInterp) -> f64 + '_ {
    move |z, segs, tf, m, n_u, nu, interp| {
        let nx = p.state_dim;
        let seg_len = (tf - p.t0) / m as f64;
        let mut cost = 0.0;
        if let Some(l) = &p.bolza_integrand {
            for (k, seg) in segs.iter().enumerate() {
                let t_start = p.t0 + k as f64 * seg_len;
                let steps = seg.nrows() - 1;
                let h = seg_len / steps as f64;
                let values = &z[m * nx + k * n_u * nu..m * nx + (k + 1) * n_u * nu];
                let schedule = ControlSchedule {
                    values,
                    n_u: nu,
                    n_points: n_u,
                    t_start,
                    t_end: t_start + seg_len,
                    interp,
                };
                let mut u = vec![0.0; nu];
                let mut prev = 0.0;
                for j in 0..=steps {
                    let t = t_start + j as f64 * h;
                    schedule.eval(t, &mut u);
                    let x: Vec<f64> = seg.row(j).iter().copied().collect();
                    let v = l(&x, &u, t);
                    if j > 0 {
                        cost += 0.5 * (prev + v) * h;
                    }
                    prev = v;
                }
            }
        }
        if let Some(mc) = &p.mayer_cost {
            let last = &segs[segs.len() - 1];
            let xn: Vec<f64> = last.row(last.nrows() - 1).iter().copied().collect();
            cost += mc(&xn, tf);
        }
        cost
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::brachistochrone::{self, BrachParams};
    use crate::ocp::{BoundaryConstraint, Horizon};
    use std::sync::Arc;

    #[test]
    fn single_shooting_var_count() {
        let problem = brachistochrone::ocp(&BrachParams::default());
        let nlp = transcribe_single_shooting(&problem, 5, 100, ShootingOptions::default()).unwrap();
        assert_eq!(nlp.n_vars, 5 + 1);
        nlp.layout.validate().unwrap();
    }

    #[test]
    fn single_shooting_rollout_deterministic() {
        let problem = brachistochrone::ocp(&BrachParams::default());
        let nlp = transcribe_single_shooting(&problem, 5, 50, ShootingOptions::default()).unwrap();
        let z = vec![0.4, 0.5, 0.6, 0.7, 0.8, 1.2];
        let a = nlp.eval_eq(&z);
        let b = nlp.eval_eq(&z);
        assert_eq!(a, b);
        let ta = crate::transcription::recover_trajectory(&nlp, &z).unwrap();
        let tb = crate::transcription::recover_trajectory(&nlp, &z).unwrap();
        assert_eq!(ta.states, tb.states);
    }

    #[test]
    fn single_shooting_requires_consistent_initial_state() {
        let mut problem = brachistochrone::ocp(&BrachParams::default());
        problem.initial_state_hint = vec![0.3, 0.0, 0.0];
        let err = transcribe_single_shooting(&problem, 5, 50, ShootingOptions::default());
        assert!(matches!(
            err,
            Err(TranscriptionError::InconsistentInitialState { .. })
        ));
    }

    #[test]
    fn multiple_shooting_var_and_matching_counts() {
        let problem = brachistochrone::ocp(&BrachParams::default());
        let nlp =
            transcribe_multiple_shooting(&problem, 2, 2, 40, ShootingOptions::default()).unwrap();
        // 2*3 segment states + 2*2*1 controls + free tf.
        assert_eq!(nlp.n_vars, 11);
        match nlp.layout.structure {
            LayoutStructure::MultipleShooting { matching_rows, .. } => {
                assert_eq!(matching_rows, 3)
            }
            _ => panic!("expected multiple shooting"),
        }
        nlp.layout.validate().unwrap();
    }

    #[test]
    fn multiple_shooting_matching_zero_for_consistent_segments() {
        // Zero dynamics: segments match when all start states are equal.
        let mut p = crate::ocp::OcpProblem::new(
            2,
            1,
            Arc::new(|_x: &[f64], _u: &[f64], _t, dx: &mut [f64]| dx.fill(0.0)),
        );
        p.horizon = Horizon::Fixed(1.0);
        p.initial_constraint = Some(BoundaryConstraint::fix_state(&[1.0, -2.0]));
        p.initial_state_hint = vec![1.0, -2.0];
        let nlp = transcribe_multiple_shooting(&p, 2, 2, 8, ShootingOptions::default()).unwrap();
        let mut z = vec![0.0; nlp.n_vars];
        z[0] = 1.0;
        z[1] = -2.0;
        z[2] = 1.0;
        z[3] = -2.0;
        let r = nlp.eval_eq(&z);
        assert!(r.amax() < 1e-14, "residual {r}");
    }

    #[test]
    fn control_schedule_interpolation_modes() {
        let values = [0.0, 1.0, 3.0];
        let lin = ControlSchedule {
            values: &values,
            n_u: 1,
            n_points: 3,
            t_start: 0.0,
            t_end: 2.0,
            interp: ControlInterp::PiecewiseLinear,
        };
        let mut u = [0.0];
        lin.eval(0.5, &mut u);
        assert_eq!(u[0], 0.5);
        lin.eval(1.5, &mut u);
        assert_eq!(u[0], 2.0);
        let zoh = ControlSchedule {
            values: &values,
            n_u: 1,
            n_points: 3,
            t_start: 0.0,
            t_end: 2.0,
            interp: ControlInterp::ZeroOrderHold,
        };
        zoh.eval(0.99, &mut u);
        assert_eq!(u[0], 0.0);
        zoh.eval(1.01, &mut u);
        assert_eq!(u[0], 1.0);
    }
}
