//! Continuous-time Bolza optimal control problems and the trajectory
//! representation shared by the transcriptions and the MPC engine.
//!
//! A problem minimizes `M(x(t_f), t_f) + ∫ L(x, u, t) dt` subject to the
//! dynamics `ẋ = f(x, u, t)`, endpoint constraints ψ₀/ψ_f, mixed path
//! constraints with bounds, and componentwise box bounds on states and
//! controls. Problems are immutable after construction and shareable across
//! threads; all callbacks must be deterministic and side-effect-free.

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::collocation::CollocationGrid;

#[derive(Debug, Error)]
pub enum OcpError {
    #[error("degenerate horizon: tf = {tf} must exceed t0 = {t0}")]
    DegenerateHorizon { t0: f64, tf: f64 },
    #[error("non-finite {what} at node {node}")]
    NonFiniteEvaluation { what: &'static str, node: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid problem: {0}")]
    Invalid(String),
}

/// `f(x, u, t, dx)` writes ẋ into `dx`.
pub type DynamicsFn = Arc<dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync>;
/// Bolza integrand `L(x, u, t)`.
pub type RunningCostFn = Arc<dyn Fn(&[f64], &[f64], f64) -> f64 + Send + Sync>;
/// Mayer term `M(x_f, t_f)`; minimum-time problems return `t_f` itself.
pub type MayerFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Boundary constraint residuals, zero when satisfied.
#[derive(Clone)]
pub struct BoundaryConstraint {
    pub dim: usize,
    pub eval: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl BoundaryConstraint {
    /// Pin the full state vector to `target`.
    pub fn fix_state(target: &[f64]) -> Self {
        let target = target.to_vec();
        Self {
            dim: target.len(),
            eval: Arc::new(move |x| x.iter().zip(&target).map(|(a, b)| a - b).collect()),
        }
    }

    /// Pin selected components: `(index, value)` pairs.
    pub fn fix_components(components: &[(usize, f64)]) -> Self {
        let components = components.to_vec();
        Self {
            dim: components.len(),
            eval: Arc::new(move |x| components.iter().map(|&(i, v)| x[i] - v).collect()),
        }
    }
}

/// Mixed state-control path constraint `g_L ≤ g(x, u, t) ≤ g_U`.
#[derive(Clone)]
pub struct PathConstraint {
    pub dim: usize,
    pub eval: Arc<dyn Fn(&[f64], &[f64], f64) -> Vec<f64> + Send + Sync>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Final time: fixed, or a free decision variable with horizon-length bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Fixed(f64),
    /// Bounds on `t_f` itself; `min` must exceed `t0` so the horizon stays
    /// strictly positive.
    Free { min: f64, max: f64 },
}

impl Horizon {
    pub fn is_free(&self) -> bool {
        matches!(self, Horizon::Free { .. })
    }
}

/// A continuous-time Bolza optimal control problem.
#[derive(Clone)]
pub struct OcpProblem {
    pub state_dim: usize,
    pub control_dim: usize,
    pub dynamics: DynamicsFn,
    pub mayer_cost: Option<MayerFn>,
    pub bolza_integrand: Option<RunningCostFn>,
    pub initial_constraint: Option<BoundaryConstraint>,
    pub terminal_constraint: Option<BoundaryConstraint>,
    pub path_constraint: Option<PathConstraint>,
    pub state_lower: Vec<f64>,
    pub state_upper: Vec<f64>,
    pub control_lower: Vec<f64>,
    pub control_upper: Vec<f64>,
    pub t0: f64,
    pub horizon: Horizon,
    /// Seed for the default initial guess: the state at `t0`.
    pub initial_state_hint: Vec<f64>,
    /// Optional per-state terminal targets for the default initial guess;
    /// components without a target hold the initial hint.
    pub terminal_state_hint: Vec<Option<f64>>,
}

impl OcpProblem {
    /// A problem with unbounded states/controls, no costs, and no endpoint
    /// constraints; fill in fields after construction.
    pub fn new(state_dim: usize, control_dim: usize, dynamics: DynamicsFn) -> Self {
        Self {
            state_dim,
            control_dim,
            dynamics,
            mayer_cost: None,
            bolza_integrand: None,
            initial_constraint: None,
            terminal_constraint: None,
            path_constraint: None,
            state_lower: vec![f64::NEG_INFINITY; state_dim],
            state_upper: vec![f64::INFINITY; state_dim],
            control_lower: vec![f64::NEG_INFINITY; control_dim],
            control_upper: vec![f64::INFINITY; control_dim],
            t0: 0.0,
            horizon: Horizon::Fixed(1.0),
            initial_state_hint: vec![0.0; state_dim],
            terminal_state_hint: vec![None; state_dim],
        }
    }

    pub fn validate(&self) -> Result<(), OcpError> {
        if self.state_lower.len() != self.state_dim
            || self.state_upper.len() != self.state_dim
            || self.control_lower.len() != self.control_dim
            || self.control_upper.len() != self.control_dim
        {
            return Err(OcpError::Dimension("bound vector lengths".into()));
        }
        for i in 0..self.state_dim {
            if self.state_lower[i] > self.state_upper[i] {
                return Err(OcpError::Invalid(format!("state bound {i} inverted")));
            }
        }
        for i in 0..self.control_dim {
            if self.control_lower[i] > self.control_upper[i] {
                return Err(OcpError::Invalid(format!("control bound {i} inverted")));
            }
        }
        if let Some(g) = &self.path_constraint {
            if g.lower.len() != g.dim || g.upper.len() != g.dim {
                return Err(OcpError::Dimension("path constraint bounds".into()));
            }
            for i in 0..g.dim {
                if g.lower[i] > g.upper[i] {
                    return Err(OcpError::Invalid(format!("path bound {i} inverted")));
                }
            }
        }
        match self.horizon {
            Horizon::Fixed(tf) => {
                if tf <= self.t0 {
                    return Err(OcpError::DegenerateHorizon { t0: self.t0, tf });
                }
            }
            Horizon::Free { min, max } => {
                if min <= self.t0 || max < min {
                    return Err(OcpError::Invalid(format!(
                        "free horizon bounds [{min}, {max}] must satisfy t0 < min <= max"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn eval_dynamics(&self, x: &[f64], u: &[f64], t: f64) -> Vec<f64> {
        let mut dx = vec![0.0; self.state_dim];
        (self.dynamics)(x, u, t, &mut dx);
        dx
    }
}

/// Map physical time to the canonical interval: τ = 2(t-t0)/(tf-t0) - 1.
pub fn scale_time(t: f64, t0: f64, tf: f64) -> Result<f64, OcpError> {
    if tf <= t0 {
        return Err(OcpError::DegenerateHorizon { t0, tf });
    }
    Ok(2.0 * (t - t0) / (tf - t0) - 1.0)
}

/// Inverse of [`scale_time`]: t = t0 + (τ+1)(tf-t0)/2.
pub fn unscale_time(tau: f64, t0: f64, tf: f64) -> Result<f64, OcpError> {
    if tf <= t0 {
        return Err(OcpError::DegenerateHorizon { t0, tf });
    }
    Ok(t0 + 0.5 * (tau + 1.0) * (tf - t0))
}

/// Discretized Bolza cost on an LGL grid:
/// `M(x_N, tf) + (tf-t0)/2 · Σ_j L(x_j, u_j, t_j) w_j`.
///
/// `states` and `controls` are (N+1)×n_x and (N+1)×n_u, row j at node j.
pub fn evaluate_cost_with_horizon(
    problem: &OcpProblem,
    grid: &CollocationGrid,
    states: &DMatrix<f64>,
    controls: &DMatrix<f64>,
    t0: f64,
    tf: f64,
) -> Result<f64, OcpError> {
    let n_nodes = grid.len();
    if states.nrows() != n_nodes || controls.nrows() != n_nodes {
        return Err(OcpError::Dimension(format!(
            "states/controls must have {n_nodes} rows"
        )));
    }
    if tf <= t0 {
        return Err(OcpError::DegenerateHorizon { t0, tf });
    }
    let mut cost = 0.0;
    if let Some(integrand) = &problem.bolza_integrand {
        let mut quad = 0.0;
        for (j, (&tau, &w)) in grid.nodes().iter().zip(grid.weights()).enumerate() {
            let t = t0 + 0.5 * (tau + 1.0) * (tf - t0);
            let x: Vec<f64> = states.row(j).iter().copied().collect();
            let u: Vec<f64> = controls.row(j).iter().copied().collect();
            let l = integrand(&x, &u, t);
            if !l.is_finite() {
                return Err(OcpError::NonFiniteEvaluation {
                    what: "Bolza integrand",
                    node: j,
                });
            }
            quad += w * l;
        }
        cost += 0.5 * (tf - t0) * quad;
    }
    if let Some(mayer) = &problem.mayer_cost {
        let xf: Vec<f64> = states.row(n_nodes - 1).iter().copied().collect();
        let m = mayer(&xf, tf);
        if !m.is_finite() {
            return Err(OcpError::NonFiniteEvaluation {
                what: "Mayer cost",
                node: n_nodes - 1,
            });
        }
        cost += m;
    }
    Ok(cost)
}

/// [`evaluate_cost_with_horizon`] using the problem's own fixed horizon.
pub fn evaluate_cost(
    problem: &OcpProblem,
    grid: &CollocationGrid,
    states: &DMatrix<f64>,
    controls: &DMatrix<f64>,
) -> Result<f64, OcpError> {
    match problem.horizon {
        Horizon::Fixed(tf) => {
            evaluate_cost_with_horizon(problem, grid, states, controls, problem.t0, tf)
        }
        Horizon::Free { .. } => Err(OcpError::Invalid(
            "evaluate_cost needs a fixed horizon; pass tf explicitly for free-time problems"
                .into(),
        )),
    }
}

/// Where a trajectory came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    OptimalPrediction,
    IntegratedPlant,
}

/// Time-stamped state/control histories with the associated cost.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// One row per time stamp.
    pub states: DMatrix<f64>,
    pub controls: DMatrix<f64>,
    pub cost: f64,
    pub provenance: Provenance,
}

impl Trajectory {
    pub fn validate(&self) -> Result<(), OcpError> {
        let n = self.times.len();
        if self.states.nrows() != n || self.controls.nrows() != n {
            return Err(OcpError::Dimension(
                "trajectory row counts must match times".into(),
            ));
        }
        for w in self.times.windows(2) {
            if w[1] <= w[0] {
                return Err(OcpError::Invalid("times must be strictly increasing".into()));
            }
        }
        if self
            .states
            .iter()
            .chain(self.controls.iter())
            .chain(self.times.iter())
            .any(|v| !v.is_finite())
        {
            return Err(OcpError::Invalid("trajectory contains non-finite values".into()));
        }
        if !self.cost.is_finite() {
            return Err(OcpError::Invalid("trajectory cost is non-finite".into()));
        }
        Ok(())
    }

    /// Linear interpolation of the state at `t`, clamped to the time range.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        interp_row(&self.times, &self.states, t)
    }

    /// Linear interpolation of the control at `t`, clamped to the time range.
    pub fn control_at(&self, t: f64) -> Vec<f64> {
        interp_row(&self.times, &self.controls, t)
    }
}

fn interp_row(times: &[f64], rows: &DMatrix<f64>, t: f64) -> Vec<f64> {
    let n = times.len();
    if t <= times[0] {
        return rows.row(0).iter().copied().collect();
    }
    if t >= times[n - 1] {
        return rows.row(n - 1).iter().copied().collect();
    }
    let k = times.partition_point(|&tk| tk <= t) - 1;
    let alpha = (t - times[k]) / (times[k + 1] - times[k]);
    (0..rows.ncols())
        .map(|c| (1.0 - alpha) * rows[(k, c)] + alpha * rows[(k + 1, c)])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn zero_dynamics() -> DynamicsFn {
        Arc::new(|_x, _u, _t, dx| dx.fill(0.0))
    }

    #[test]
    fn scale_time_endpoints_and_midpoint() {
        assert_eq!(scale_time(0.0, 0.0, 5.0).unwrap(), -1.0);
        assert_eq!(scale_time(5.0, 0.0, 5.0).unwrap(), 1.0);
        assert_eq!(scale_time(2.5, 0.0, 5.0).unwrap(), 0.0);
        assert!(scale_time(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn scale_unscale_roundtrip() {
        for t in [0.3, 1.7, 4.99] {
            let tau = scale_time(t, 0.25, 5.25).unwrap();
            assert_relative_eq!(unscale_time(tau, 0.25, 5.25).unwrap(), t, epsilon = 1e-14);
        }
    }

    #[test]
    fn cost_pure_mayer() {
        let mut p = OcpProblem::new(2, 1, zero_dynamics());
        p.mayer_cost = Some(Arc::new(|xf, _tf| xf[0]));
        p.horizon = Horizon::Fixed(1.0);
        let grid = CollocationGrid::new(4).unwrap();
        let mut states = DMatrix::zeros(5, 2);
        states[(4, 0)] = 3.0;
        let controls = DMatrix::zeros(5, 1);
        let c = evaluate_cost(&p, &grid, &states, &controls).unwrap();
        assert_eq!(c, 3.0);
    }

    #[test]
    fn cost_unit_integrand_equals_horizon() {
        let mut p = OcpProblem::new(1, 1, zero_dynamics());
        p.bolza_integrand = Some(Arc::new(|_x, _u, _t| 1.0));
        p.horizon = Horizon::Fixed(5.0);
        let grid = CollocationGrid::new(7).unwrap();
        let states = DMatrix::zeros(8, 1);
        let controls = DMatrix::zeros(8, 1);
        let c = evaluate_cost(&p, &grid, &states, &controls).unwrap();
        assert_relative_eq!(c, 5.0, epsilon = 1e-10);
    }

    #[test]
    fn cost_quadrature_of_time() {
        // L = t over [0, 2] integrates to 2.
        let mut p = OcpProblem::new(1, 1, zero_dynamics());
        p.bolza_integrand = Some(Arc::new(|_x, _u, t| t));
        p.horizon = Horizon::Fixed(2.0);
        let grid = CollocationGrid::new(6).unwrap();
        let states = DMatrix::zeros(7, 1);
        let controls = DMatrix::zeros(7, 1);
        let c = evaluate_cost(&p, &grid, &states, &controls).unwrap();
        assert_relative_eq!(c, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn cost_linear_in_integrand() {
        let grid = CollocationGrid::new(5).unwrap();
        let states = DMatrix::from_fn(6, 1, |r, _| r as f64 * 0.3);
        let controls = DMatrix::from_fn(6, 1, |r, _| 1.0 - r as f64 * 0.1);
        let l1: RunningCostFn = Arc::new(|x, _u, _t| x[0] * x[0]);
        let l2: RunningCostFn = Arc::new(|_x, u, t| u[0] + t);
        let (alpha, beta) = (2.5, -0.75);

        let eval = |l: RunningCostFn| {
            let mut p = OcpProblem::new(1, 1, zero_dynamics());
            p.bolza_integrand = Some(l);
            p.horizon = Horizon::Fixed(3.0);
            evaluate_cost(&p, &grid, &states, &controls).unwrap()
        };
        let c1 = eval(l1.clone());
        let c2 = eval(l2.clone());
        let combined: RunningCostFn = Arc::new(move |x, u, t| alpha * l1(x, u, t) + beta * l2(x, u, t));
        let c = eval(combined);
        assert_relative_eq!(c, alpha * c1 + beta * c2, epsilon = 1e-12);
    }

    #[test]
    fn cost_reports_nonfinite_node() {
        let mut p = OcpProblem::new(1, 1, zero_dynamics());
        p.bolza_integrand = Some(Arc::new(|x, _u, _t| 1.0 / x[0]));
        p.horizon = Horizon::Fixed(1.0);
        let grid = CollocationGrid::new(3).unwrap();
        let mut states = DMatrix::from_element(4, 1, 1.0);
        states[(2, 0)] = 0.0;
        let controls = DMatrix::zeros(4, 1);
        match evaluate_cost(&p, &grid, &states, &controls) {
            Err(OcpError::NonFiniteEvaluation { node, .. }) => assert_eq!(node, 2),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn callbacks_are_deterministic() {
        let p = OcpProblem::new(2, 1, Arc::new(|x: &[f64], u: &[f64], t, dx: &mut [f64]| {
            dx[0] = x[1] * t;
            dx[1] = u[0] - x[0].sin();
        }));
        let a = p.eval_dynamics(&[0.3, -1.2], &[0.7], 2.0);
        let b = p.eval_dynamics(&[0.3, -1.2], &[0.7], 2.0);
        assert_eq!(a, b);
    }

    #[test]
    fn problem_validation_catches_inverted_bounds() {
        let mut p = OcpProblem::new(1, 1, zero_dynamics());
        p.state_lower = vec![1.0];
        p.state_upper = vec![-1.0];
        assert!(p.validate().is_err());
    }

    #[test]
    fn trajectory_validation_and_sampling() {
        let traj = Trajectory {
            times: vec![0.0, 1.0, 2.0],
            states: DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 2.0, 2.0, 4.0]),
            controls: DMatrix::from_row_slice(3, 1, &[0.5, 0.5, 0.5]),
            cost: 1.0,
            provenance: Provenance::OptimalPrediction,
        };
        traj.validate().unwrap();
        assert_eq!(traj.state_at(0.5), vec![0.5, 1.0]);
        assert_eq!(traj.state_at(-1.0), vec![0.0, 0.0]);
        assert_eq!(traj.state_at(9.0), vec![2.0, 4.0]);

        let bad = Trajectory {
            times: vec![0.0, 0.0],
            states: DMatrix::zeros(2, 1),
            controls: DMatrix::zeros(2, 1),
            cost: 0.0,
            provenance: Provenance::IntegratedPlant,
        };
        assert!(bad.validate().is_err());
    }
}
