//! Receding-horizon control: build the windowed OCP each sample, solve it
//! warm-started, apply the first control, integrate the plant, log.

mod cost;
mod linearize;

pub use cost::{build_cost, CostKind, Weights};
pub use linearize::{linearize, LinearModel};

use std::sync::Arc;

use thiserror::Error;

use crate::collocation::CollocationGrid;
use crate::integrate::{rk45_integrate, IntegrationError};
use crate::ocp::{BoundaryConstraint, DynamicsFn, Horizon, OcpProblem, Trajectory};
use crate::sqp::{self, ConstraintId, SolverOptions, SolverStatus};
use crate::transcription::{
    control_index, recover_trajectory, state_index, transcribe_pseudospectral,
};

#[derive(Debug, Error)]
pub enum MpcError {
    #[error("invalid MPC configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Transcription(#[from] crate::transcription::TranscriptionError),
    #[error(transparent)]
    Solver(#[from] crate::sqp::SqpError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error("plant state diverged at t = {0}")]
    Diverged(f64),
}

/// Time-varying reference the controller tracks: full state and feed-forward
/// control at any query time.
pub trait ReferenceGenerator: Send + Sync {
    fn state_ref(&self, t: f64) -> Vec<f64>;
    fn control_ref(&self, t: f64) -> Vec<f64>;
    /// Signed distance from a position to the nominal path, when the
    /// reference has time-independent path geometry (a line or a circle).
    /// Path-tracking costs use this; `None` falls back to the distance to
    /// the time-parameterized reference point.
    fn path_distance(&self, position: &[f64]) -> Option<f64> {
        let _ = position;
        None
    }
    /// True when `t` lies beyond the defined profile and the value was
    /// clamped to the final segment.
    fn clamped(&self, t: f64) -> bool {
        let _ = t;
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerMode {
    Nonlinear,
    /// Internal model re-linearized once per sample.
    Linear,
}

/// Where the linear mode linearizes: at the measured plant state (with the
/// reference feed-forward control), or at the reference state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearizationPoint {
    PlantState,
    Reference,
}

#[derive(Clone)]
pub struct MpcConfig {
    /// Prediction horizon H_p, s.
    pub prediction_horizon: f64,
    /// Control horizon H_u, s; must equal the prediction horizon.
    pub control_horizon: f64,
    /// LGL polynomial order of the windowed transcription.
    pub collocation_order: usize,
    /// Controller sample period, s.
    pub sample_period: f64,
    /// Plant integration step hint, s (the plant integrator is adaptive; this
    /// is also the fixed step used by open-loop integration studies).
    pub plant_dt: f64,
    pub mode: ControllerMode,
    pub linearization: LinearizationPoint,
    pub solver: SolverOptions,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            prediction_horizon: 5.0,
            control_horizon: 5.0,
            collocation_order: 50,
            sample_period: 0.1,
            plant_dt: 0.01,
            mode: ControllerMode::Nonlinear,
            linearization: LinearizationPoint::PlantState,
            solver: SolverOptions::default(),
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), MpcError> {
        if self.control_horizon != self.prediction_horizon {
            return Err(MpcError::Config(
                "control horizon must equal the prediction horizon".into(),
            ));
        }
        if !(self.sample_period > 0.0 && self.sample_period <= self.prediction_horizon) {
            return Err(MpcError::Config(
                "need 0 < sample_period <= prediction_horizon".into(),
            ));
        }
        if !(self.plant_dt > 0.0 && self.plant_dt <= self.sample_period) {
            return Err(MpcError::Config("need 0 < dt <= sample_period".into()));
        }
        if self.collocation_order < 1 {
            return Err(MpcError::Config("collocation order must be >= 1".into()));
        }
        Ok(())
    }
}

/// The controlled system: the model the controller optimizes over, the plant
/// it acts on (may carry extra log-only states after the controller view),
/// box constraints, and the tracking cost.
#[derive(Clone)]
pub struct MpcProblem {
    pub state_dim: usize,
    pub control_dim: usize,
    pub dynamics: DynamicsFn,
    pub plant_dim: usize,
    pub plant_dynamics: DynamicsFn,
    pub state_lower: Vec<f64>,
    pub state_upper: Vec<f64>,
    pub control_lower: Vec<f64>,
    pub control_upper: Vec<f64>,
    pub cost_kind: CostKind,
    pub weights: Weights,
}

/// Zero-order-hold plant propagation over one interval with an adaptive
/// embedded Runge-Kutta pair at 1e-8 tolerances.
pub fn integrate_plant(
    dynamics: &DynamicsFn,
    x: &[f64],
    u: &[f64],
    dt: f64,
) -> Result<Vec<f64>, IntegrationError> {
    let f = |t: f64, xs: &[f64], dx: &mut [f64]| dynamics(xs, u, t, dx);
    rk45_integrate(&f, 0.0, x, dt, 1e-8, 1e-8)
}

/// Carry-over from the previous sample: primal solution, its QP active set,
/// and the window start it was computed for.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub z: Vec<f64>,
    pub active_set: Vec<ConstraintId>,
    pub window_start: f64,
    /// Quasi-Newton metric carried across samples; the Lagrangian curvature
    /// changes little over one sample shift.
    pub metric: nalgebra::DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub status: SolverStatus,
    pub iterations: usize,
    pub solve_time_ms: f64,
    pub objective: f64,
    /// Set when the solver failed and the previous control was held.
    pub degraded: bool,
}

/// Output of one controller sample.
pub struct StepResult {
    pub control: Vec<f64>,
    pub predicted: Option<Trajectory>,
    pub diagnostics: StepDiagnostics,
    pub warm: Option<WarmStart>,
}

/// One receding-horizon sample: transcribe the windowed OCP pseudospectrally,
/// solve warm-started, and return the first control.
///
/// `control_bounds` are the possibly FDI-reconfigured box bounds in force for
/// this sample. On solver failure the previous control is returned with the
/// degraded flag set; the loop never halts mid-run.
#[allow(clippy::too_many_arguments)]
pub fn mpc_step(
    config: &MpcConfig,
    problem: &MpcProblem,
    grid: &CollocationGrid,
    t_now: f64,
    plant_state: &[f64],
    reference: &Arc<dyn ReferenceGenerator>,
    control_bounds: (&[f64], &[f64]),
    warm: Option<&WarmStart>,
    previous_control: &[f64],
) -> Result<StepResult, MpcError> {
    let nx = problem.state_dim;
    let nu = problem.control_dim;
    let hp = config.prediction_horizon;
    let ctl_state = &plant_state[..nx];

    let dynamics = match config.mode {
        ControllerMode::Nonlinear => problem.dynamics.clone(),
        ControllerMode::Linear => {
            let u_ref = reference.control_ref(t_now);
            let x_lin = match config.linearization {
                LinearizationPoint::PlantState => ctl_state.to_vec(),
                LinearizationPoint::Reference => reference.state_ref(t_now),
            };
            linearize(&problem.dynamics, nx, nu, &x_lin, &u_ref, t_now).as_dynamics()
        }
    };

    let mut ocp = OcpProblem::new(nx, nu, dynamics);
    ocp.t0 = t_now;
    ocp.horizon = Horizon::Fixed(t_now + hp);
    ocp.bolza_integrand = Some(build_cost(
        problem.cost_kind,
        problem.weights,
        reference.clone(),
    )?);
    ocp.initial_constraint = Some(BoundaryConstraint::fix_state(ctl_state));
    ocp.state_lower = problem.state_lower.clone();
    ocp.state_upper = problem.state_upper.clone();
    ocp.control_lower = control_bounds.0.to_vec();
    ocp.control_upper = control_bounds.1.to_vec();
    ocp.initial_state_hint = ctl_state.to_vec();

    let mut nlp = transcribe_pseudospectral(&ocp, config.collocation_order)?;
    // The initial node is pinned by the equality constraint; its box bounds
    // are lifted so a plant state marginally outside the box cannot make the
    // window infeasible.
    for s in 0..nx {
        let idx = state_index(&nlp.layout, s, 0);
        nlp.lower[idx] = f64::NEG_INFINITY;
        nlp.upper[idx] = f64::INFINITY;
    }

    let n_nodes = config.collocation_order + 1;
    let mut z0 = vec![0.0; nlp.n_vars];
    match warm {
        Some(w) => {
            // Shift the previous optimal controls to the new window (holding
            // the final value beyond the old horizon end), then integrate
            // the model from the measured state under that schedule. The
            // seed is dynamics-consistent everywhere, so the first QP only
            // re-optimizes instead of restoring feasibility.
            let prev_start = w.window_start;
            let control_cols: Vec<Vec<f64>> = (0..nu)
                .map(|c| {
                    (0..n_nodes)
                        .map(|k| w.z[control_index(&nlp.layout, c, k)])
                        .collect()
                })
                .collect();
            let control_at = |t: f64| -> Vec<f64> {
                let tau_prev = (2.0 * (t - prev_start) / hp - 1.0).clamp(-1.0, 1.0);
                control_cols
                    .iter()
                    .map(|col| grid.interpolate(col, tau_prev).unwrap_or(col[n_nodes - 1]))
                    .collect()
            };
            let dynamics = problem.dynamics.clone();
            let f = |t: f64, xs: &[f64], dx: &mut [f64]| {
                let u = control_at(t);
                dynamics(xs, &u, t, dx);
            };
            let mut x = ctl_state.to_vec();
            let mut t_cur = t_now;
            for j in 0..n_nodes {
                let t_j = t_now + nlp.layout.state_fractions[j] * hp;
                let span = t_j - t_cur;
                if span > 0.0 {
                    let steps = ((span / 0.02).ceil() as usize).max(2);
                    x = crate::integrate::rk4_integrate(&f, t_cur, &x, span, steps);
                    t_cur = t_j;
                }
                if x.iter().any(|v| !v.is_finite()) {
                    x = ctl_state.to_vec();
                }
                for s in 0..nx {
                    z0[state_index(&nlp.layout, s, j)] = x[s];
                }
                let u_j = control_at(t_j);
                for c in 0..nu {
                    z0[control_index(&nlp.layout, c, j)] = u_j[c];
                }
            }
        }
        None => {
            // Cold start: integrate the model from the measured state under
            // the feed-forward schedule, like the warm path but with the
            // reference control in place of a previous solution.
            let dynamics = problem.dynamics.clone();
            let reference = reference.clone();
            let f = |t: f64, xs: &[f64], dx: &mut [f64]| {
                let u = reference.control_ref(t);
                dynamics(xs, &u, t, dx);
            };
            let mut x = ctl_state.to_vec();
            let mut t_cur = t_now;
            for j in 0..n_nodes {
                let t_j = t_now + nlp.layout.state_fractions[j] * hp;
                let span = t_j - t_cur;
                if span > 0.0 {
                    let steps = ((span / 0.02).ceil() as usize).max(2);
                    x = crate::integrate::rk4_integrate(&f, t_cur, &x, span, steps);
                    t_cur = t_j;
                }
                if x.iter().any(|v| !v.is_finite()) {
                    x = ctl_state.to_vec();
                }
                for s in 0..nx {
                    z0[state_index(&nlp.layout, s, j)] = x[s];
                }
                let u_ref = reference.control_ref(t_j);
                for c in 0..nu {
                    z0[control_index(&nlp.layout, c, j)] = u_ref[c];
                }
            }
        }
    }
    for s in 0..nx {
        z0[state_index(&nlp.layout, s, 0)] = ctl_state[s];
    }

    let seed: Vec<ConstraintId> = warm.map(|w| w.active_set.clone()).unwrap_or_default();
    let solved = sqp::solve_with_metric(
        &nlp,
        &z0,
        &seed,
        warm.map(|w| &w.metric),
        &config.solver,
    );

    let fallback = |status: SolverStatus| StepResult {
        control: previous_control.to_vec(),
        predicted: None,
        diagnostics: StepDiagnostics {
            status,
            iterations: 0,
            solve_time_ms: 0.0,
            objective: f64::NAN,
            degraded: true,
        },
        warm: None,
    };

    let sol = match solved {
        Ok(sol) => sol,
        Err(_) => return Ok(fallback(SolverStatus::Infeasible)),
    };
    if sol.status == SolverStatus::Infeasible || sol.z.iter().any(|v| !v.is_finite()) {
        let mut r = fallback(sol.status);
        r.diagnostics.iterations = sol.iterations;
        r.diagnostics.solve_time_ms = sol.solve_time_ms;
        return Ok(r);
    }

    let control: Vec<f64> = (0..nu)
        .map(|c| sol.z[control_index(&nlp.layout, c, 0)])
        .collect();
    let predicted = recover_trajectory(&nlp, &sol.z).ok();
    Ok(StepResult {
        control,
        predicted,
        diagnostics: StepDiagnostics {
            status: sol.status,
            iterations: sol.iterations,
            solve_time_ms: sol.solve_time_ms,
            objective: sol.objective,
            degraded: false,
        },
        warm: Some(WarmStart {
            z: sol.z,
            active_set: sol.active_set,
            window_start: t_now,
            metric: sol.final_metric,
        }),
    })
}

/// A closed-loop run description. The control filter intercepts commanded
/// controls plant-side (actuator faults); the bounds update reconfigures the
/// controller's box bounds from FDI messages.
#[derive(Clone)]
pub struct Scenario {
    pub initial_plant_state: Vec<f64>,
    pub duration: f64,
    pub reference: Arc<dyn ReferenceGenerator>,
    pub control_filter: Option<Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>>,
    #[allow(clippy::type_complexity)]
    pub bounds_update: Option<Arc<dyn Fn(f64, &mut [f64], &mut [f64]) + Send + Sync>>,
    /// Position/velocity tracking errors from (plant state, reference state).
    #[allow(clippy::type_complexity)]
    pub tracking_error: Arc<dyn Fn(&[f64], &[f64]) -> (f64, f64) + Send + Sync>,
    /// Abort the run when this returns true (e.g. ground contact).
    pub stop_when: Option<Arc<dyn Fn(f64, &[f64]) -> bool + Send + Sync>>,
}

#[derive(Debug, Clone)]
pub struct SampleRecord {
    pub t: f64,
    pub plant_state: Vec<f64>,
    pub applied_control: Vec<f64>,
    pub predicted_cost: f64,
    pub status: SolverStatus,
    pub degraded: bool,
    pub iterations: usize,
    pub solve_time_ms: f64,
    pub track_err_pos: f64,
    pub track_err_vel: f64,
}

#[derive(Debug, Clone)]
pub struct ClosedLoopLog {
    pub sample_period: f64,
    pub records: Vec<SampleRecord>,
    pub completed: bool,
    pub failure: Option<String>,
}

impl ClosedLoopLog {
    pub fn final_state(&self) -> Option<&[f64]> {
        self.records.last().map(|r| r.plant_state.as_slice())
    }
}

/// Run the receding-horizon loop for the scenario duration: solve, apply the
/// first control (through the fault filter), integrate the plant, repeat.
///
/// Solver failures hold the previous control and mark the sample degraded;
/// only plant divergence or an explicit stop condition ends the run early.
pub fn run_closed_loop(
    config: &MpcConfig,
    problem: &MpcProblem,
    scenario: &Scenario,
) -> Result<ClosedLoopLog, MpcError> {
    config.validate()?;
    let grid = CollocationGrid::new(config.collocation_order)
        .map_err(crate::transcription::TranscriptionError::Collocation)?;
    let steps = (scenario.duration / config.sample_period).round() as usize;
    let mut records = Vec::with_capacity(steps);
    let mut plant = scenario.initial_plant_state.clone();
    let mut warm: Option<WarmStart> = None;

    let base_lo = problem.control_lower.clone();
    let base_hi = problem.control_upper.clone();
    let bounds_at = |t: f64| {
        let mut lo = base_lo.clone();
        let mut hi = base_hi.clone();
        if let Some(update) = &scenario.bounds_update {
            update(t, &mut lo, &mut hi);
        }
        (lo, hi)
    };

    let clip_ref_control = |t: f64, lo: &[f64], hi: &[f64]| -> Vec<f64> {
        scenario
            .reference
            .control_ref(t)
            .iter()
            .enumerate()
            .map(|(i, v)| v.clamp(lo[i], hi[i]))
            .collect()
    };

    let mut previous_control = {
        let (lo, hi) = bounds_at(0.0);
        clip_ref_control(0.0, &lo, &hi)
    };

    for k in 0..steps {
        let t = k as f64 * config.sample_period;
        if let Some(stop) = &scenario.stop_when {
            if stop(t, &plant) {
                return Ok(ClosedLoopLog {
                    sample_period: config.sample_period,
                    records,
                    completed: false,
                    failure: Some(format!("stop condition met at t = {t:.2} s")),
                });
            }
        }
        let (lo, hi) = bounds_at(t);
        let step = mpc_step(
            config,
            problem,
            &grid,
            t,
            &plant,
            &scenario.reference,
            (&lo, &hi),
            warm.as_ref(),
            &previous_control,
        )?;
        warm = step.warm;
        let commanded = step.control;
        let applied = match &scenario.control_filter {
            Some(filter) => filter(t, &commanded),
            None => commanded.clone(),
        };
        let ref_state = scenario.reference.state_ref(t);
        let (track_err_pos, track_err_vel) = (scenario.tracking_error)(&plant, &ref_state);
        records.push(SampleRecord {
            t,
            plant_state: plant.clone(),
            applied_control: applied.clone(),
            predicted_cost: step.diagnostics.objective,
            status: step.diagnostics.status,
            degraded: step.diagnostics.degraded,
            iterations: step.diagnostics.iterations,
            solve_time_ms: step.diagnostics.solve_time_ms,
            track_err_pos,
            track_err_vel,
        });
        match integrate_plant(
            &problem.plant_dynamics,
            &plant,
            &applied,
            config.sample_period,
        ) {
            Ok(next) if next.iter().all(|v| v.is_finite()) => plant = next,
            Ok(_) | Err(_) => {
                return Ok(ClosedLoopLog {
                    sample_period: config.sample_period,
                    records,
                    completed: false,
                    failure: Some(format!("plant diverged at t = {t:.2} s")),
                });
            }
        }
        previous_control = commanded;
    }

    Ok(ClosedLoopLog {
        sample_period: config.sample_period,
        records,
        completed: true,
        failure: None,
    })
}
