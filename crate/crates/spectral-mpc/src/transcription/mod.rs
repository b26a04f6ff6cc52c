//! Direct transcriptions: convert an [`OcpProblem`] into a finite-dimensional
//! [`NlpProblem`] and recover trajectories from solutions.
//!
//! Four methods are provided, matching the common direct families:
//! pseudospectral collocation on an LGL grid ([`transcribe_pseudospectral`]),
//! collocation with Euler integration ([`transcribe_euler`]), direct single
//! shooting ([`transcribe_single_shooting`]) and direct multiple shooting
//! ([`transcribe_multiple_shooting`]).

mod euler;
mod pseudospectral;
mod shooting;

pub use euler::transcribe_euler;
pub use pseudospectral::transcribe_pseudospectral;
pub use shooting::{
    transcribe_multiple_shooting, transcribe_single_shooting, ControlInterp, ShootingOptions,
};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::ocp::{Horizon, OcpProblem, Trajectory};

#[derive(Debug, Error)]
pub enum TranscriptionError {
    #[error(transparent)]
    Ocp(#[from] crate::ocp::OcpError),
    #[error(transparent)]
    Collocation(#[from] crate::collocation::CollocationError),
    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),
    #[error("rollout diverged in segment {segment}")]
    DivergedRollout { segment: usize },
    #[error("solution has {got} entries, layout expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shooting requires an initial state hint satisfying the initial constraint (residual {residual:.3e})")]
    InconsistentInitialState { residual: f64 },
}

/// What a decision-vector entry represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    State { state: usize, node: usize },
    Control { control: usize, node: usize },
    FinalTime,
}

/// Which transcription produced a layout, with its structural counts.
#[derive(Debug, Clone, PartialEq)]
pub enum LayoutStructure {
    /// States and controls at every grid node; `defect_rows` dynamics
    /// equalities.
    Collocation { defect_rows: usize },
    /// Controls only; dynamics handled by one forward rollout.
    SingleShooting { rollout_steps: usize },
    /// Per-segment initial states plus controls; `matching_rows` continuity
    /// equalities.
    MultipleShooting {
        segments: usize,
        points_per_segment: usize,
        matching_rows: usize,
    },
}

/// Maps decision-vector indices to model quantities.
#[derive(Debug, Clone)]
pub struct VariableLayout {
    pub n_states: usize,
    pub n_controls: usize,
    /// Grid nodes for collocation; control points for single shooting;
    /// segments for multiple shooting (see `structure`).
    pub n_nodes: usize,
    pub free_tf: bool,
    pub structure: LayoutStructure,
    /// Horizon fraction in [0, 1] for each state node (used by the default
    /// initial guess).
    pub state_fractions: Vec<f64>,
    /// Horizon fraction for each control node.
    pub control_fractions: Vec<f64>,
    entries: Vec<VarKind>,
}

impl VariableLayout {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        n_states: usize,
        n_controls: usize,
        n_nodes: usize,
        free_tf: bool,
        structure: LayoutStructure,
        state_fractions: Vec<f64>,
        control_fractions: Vec<f64>,
        entries: Vec<VarKind>,
    ) -> Self {
        Self {
            n_states,
            n_controls,
            n_nodes,
            free_tf,
            structure,
            state_fractions,
            control_fractions,
            entries,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.entries.len()
    }

    pub fn kind(&self, index: usize) -> VarKind {
        self.entries[index]
    }

    pub fn entries(&self) -> &[VarKind] {
        &self.entries
    }

    pub fn tf_index(&self) -> Option<usize> {
        if self.free_tf {
            Some(self.entries.len() - 1)
        } else {
            None
        }
    }

    /// Horizon end for a decision vector, given the problem's horizon spec.
    pub fn tf_value(&self, z: &[f64], horizon: &Horizon) -> f64 {
        match (self.tf_index(), horizon) {
            (Some(i), _) => z[i],
            (None, Horizon::Fixed(tf)) => *tf,
            (None, Horizon::Free { max, .. }) => *max,
        }
    }

    /// The layout must cover exactly `[0, n_vars)` with no slot mapped twice.
    pub fn validate(&self) -> Result<(), TranscriptionError> {
        let mut seen_state = vec![false; self.n_states * self.state_fractions.len()];
        let mut seen_control = vec![false; self.n_controls * self.control_fractions.len()];
        let mut seen_tf = false;
        for kind in &self.entries {
            match *kind {
                VarKind::State { state, node } => {
                    let slot = node * self.n_states + state;
                    if state >= self.n_states || seen_state[slot] {
                        return Err(TranscriptionError::InvalidDiscretization(
                            "layout repeats a state slot".into(),
                        ));
                    }
                    seen_state[slot] = true;
                }
                VarKind::Control { control, node } => {
                    let slot = node * self.n_controls + control;
                    if control >= self.n_controls || seen_control[slot] {
                        return Err(TranscriptionError::InvalidDiscretization(
                            "layout repeats a control slot".into(),
                        ));
                    }
                    seen_control[slot] = true;
                }
                VarKind::FinalTime => {
                    if seen_tf {
                        return Err(TranscriptionError::InvalidDiscretization(
                            "layout repeats the final-time slot".into(),
                        ));
                    }
                    seen_tf = true;
                }
            }
        }
        Ok(())
    }
}

/// A layout for collocation methods: `z = [x(0..=N) | u(0..=N) | tf?]`,
/// node-major within each block.
pub(crate) fn collocation_layout(
    n_states: usize,
    n_controls: usize,
    n_nodes: usize,
    free_tf: bool,
    fractions: Vec<f64>,
    defect_rows: usize,
) -> VariableLayout {
    let mut entries = Vec::with_capacity(n_nodes * (n_states + n_controls) + free_tf as usize);
    for node in 0..n_nodes {
        for state in 0..n_states {
            entries.push(VarKind::State { state, node });
        }
    }
    for node in 0..n_nodes {
        for control in 0..n_controls {
            entries.push(VarKind::Control { control, node });
        }
    }
    if free_tf {
        entries.push(VarKind::FinalTime);
    }
    VariableLayout::new(
        n_states,
        n_controls,
        n_nodes,
        free_tf,
        LayoutStructure::Collocation { defect_rows },
        fractions.clone(),
        fractions,
        entries,
    )
}

/// Index of state `i` at node `j` in a collocation layout.
#[inline]
pub fn state_index(layout: &VariableLayout, state: usize, node: usize) -> usize {
    node * layout.n_states + state
}

/// Index of control `i` at node `j` in a collocation layout.
#[inline]
pub fn control_index(layout: &VariableLayout, control: usize, node: usize) -> usize {
    layout.n_nodes * layout.n_states + node * layout.n_controls + control
}

pub(crate) fn unpack_states(layout: &VariableLayout, z: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(layout.n_nodes, layout.n_states, |j, i| {
        z[state_index(layout, i, j)]
    })
}

pub(crate) fn unpack_controls(layout: &VariableLayout, z: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(layout.n_nodes, layout.n_controls, |j, i| {
        z[control_index(layout, i, j)]
    })
}

/// The finite-dimensional program a transcription produces.
///
/// Equality constraints are residuals driven to zero; the inequality block
/// carries two-sided bounds on `g(z)`. `lower`/`upper` bound the decision
/// vector itself (±∞ where absent). Derivative callbacks are optional; the
/// solver falls back to dense central finite differences when absent.
pub struct NlpProblem {
    pub n_vars: usize,
    pub objective: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub objective_gradient: Option<Box<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>>,
    /// Diagonal curvature estimate of the objective, used to seed the
    /// solver's quasi-Newton metric at the right scale.
    pub objective_hessian_diag: Option<Box<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>>,
    pub eq_dim: usize,
    pub eq_constraints: Box<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>,
    pub eq_jacobian: Option<Box<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>>,
    pub ineq_dim: usize,
    pub ineq_constraints: Option<Box<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>>,
    pub ineq_jacobian: Option<Box<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>>,
    pub ineq_lower: DVector<f64>,
    pub ineq_upper: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub layout: VariableLayout,
    pub(crate) recover:
        Box<dyn Fn(&[f64]) -> Result<Trajectory, TranscriptionError> + Send + Sync>,
}

impl NlpProblem {
    pub fn eval_objective(&self, z: &[f64]) -> f64 {
        (self.objective)(z)
    }

    pub fn eval_eq(&self, z: &[f64]) -> DVector<f64> {
        (self.eq_constraints)(z)
    }
}

/// Unpack a solution vector into a time-stamped trajectory.
///
/// Collocation layouts report states/controls at the unscaled grid times;
/// shooting layouts re-run the stored rollout.
pub fn recover_trajectory(nlp: &NlpProblem, z: &[f64]) -> Result<Trajectory, TranscriptionError> {
    if z.len() != nlp.n_vars {
        return Err(TranscriptionError::DimensionMismatch {
            expected: nlp.n_vars,
            got: z.len(),
        });
    }
    (nlp.recover)(z)
}

/// The documented default initial guess: states interpolate linearly from the
/// initial-state hint toward the terminal hint (holding the initial value
/// where no target exists), controls sit at bound midpoints (zero when
/// unbounded), and a free final time starts at 1.5× its lower bound.
pub fn default_initial_guess(problem: &OcpProblem, layout: &VariableLayout) -> Vec<f64> {
    let mut z = vec![0.0; layout.n_vars()];
    for (idx, kind) in layout.entries().iter().enumerate() {
        z[idx] = match *kind {
            VarKind::State { state, node } => {
                let frac = layout.state_fractions[node];
                let x0 = problem.initial_state_hint[state];
                let xf = problem.terminal_state_hint[state].unwrap_or(x0);
                x0 + frac * (xf - x0)
            }
            VarKind::Control { control, .. } => {
                bound_midpoint(problem.control_lower[control], problem.control_upper[control])
            }
            VarKind::FinalTime => match problem.horizon {
                Horizon::Free { min, max } => (1.5 * min).min(max),
                Horizon::Fixed(tf) => tf,
            },
        };
    }
    z
}

fn bound_midpoint(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    }
}

/// Decision-vector bounds common to the collocation transcriptions.
pub(crate) fn collocation_bounds(
    problem: &OcpProblem,
    layout: &VariableLayout,
) -> (DVector<f64>, DVector<f64>) {
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
                if let Horizon::Free { min, max } = problem.horizon {
                    lower[idx] = min;
                    upper[idx] = max;
                }
            }
        }
    }
    (lower, upper)
}

/// Central-difference Jacobians of the dynamics at one point:
/// (∂f/∂x, ∂f/∂u).
pub(crate) fn dynamics_jacobians(
    problem: &OcpProblem,
    x: &[f64],
    u: &[f64],
    t: f64,
    h0: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let nx = problem.state_dim;
    let nu = problem.control_dim;
    let mut fx = DMatrix::zeros(nx, nx);
    let mut fu = DMatrix::zeros(nx, nu);
    let mut xp = x.to_vec();
    let mut plus = vec![0.0; nx];
    let mut minus = vec![0.0; nx];
    for c in 0..nx {
        let h = h0 * (1.0 + x[c].abs());
        xp[c] = x[c] + h;
        (problem.dynamics)(&xp, u, t, &mut plus);
        xp[c] = x[c] - h;
        (problem.dynamics)(&xp, u, t, &mut minus);
        xp[c] = x[c];
        for r in 0..nx {
            fx[(r, c)] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    let mut up = u.to_vec();
    for c in 0..nu {
        let h = h0 * (1.0 + u[c].abs());
        up[c] = u[c] + h;
        (problem.dynamics)(x, &up, t, &mut plus);
        up[c] = u[c] - h;
        (problem.dynamics)(x, &up, t, &mut minus);
        up[c] = u[c];
        for r in 0..nx {
            fu[(r, c)] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    (fx, fu)
}

/// Central-difference Jacobian of a boundary constraint.
pub(crate) fn boundary_jacobian(
    bc: &crate::ocp::BoundaryConstraint,
    x: &[f64],
    h0: f64,
) -> DMatrix<f64> {
    let nx = x.len();
    let mut jac = DMatrix::zeros(bc.dim, nx);
    let mut xp = x.to_vec();
    for c in 0..nx {
        let h = h0 * (1.0 + x[c].abs());
        xp[c] = x[c] + h;
        let plus = (bc.eval)(&xp);
        xp[c] = x[c] - h;
        let minus = (bc.eval)(&xp);
        xp[c] = x[c];
        for r in 0..bc.dim {
            jac[(r, c)] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn toy_problem() -> OcpProblem {
        let mut p = OcpProblem::new(2, 1, Arc::new(|_x: &[f64], _u: &[f64], _t, dx: &mut [f64]| dx.fill(0.0)));
        p.control_lower = vec![-2.0];
        p.control_upper = vec![6.0];
        p.initial_state_hint = vec![1.0, 0.0];
        p.terminal_state_hint = vec![Some(3.0), None];
        p.horizon = Horizon::Free { min: 1.0, max: 10.0 };
        p
    }

    #[test]
    fn layout_covers_all_indices_once() {
        let layout = collocation_layout(2, 1, 4, true, vec![0.0, 0.25, 0.75, 1.0], 8);
        assert_eq!(layout.n_vars(), 4 * 3 + 1);
        layout.validate().unwrap();
        assert_eq!(layout.tf_index(), Some(12));
        assert_eq!(layout.kind(0), VarKind::State { state: 0, node: 0 });
        assert_eq!(state_index(&layout, 1, 2), 5);
        assert_eq!(control_index(&layout, 0, 3), 11);
    }

    #[test]
    fn default_guess_interpolates_and_uses_midpoints() {
        let p = toy_problem();
        let layout = collocation_layout(2, 1, 3, true, vec![0.0, 0.5, 1.0], 6);
        let z = default_initial_guess(&p, &layout);
        // State 0 goes 1 -> 3; state 1 holds at 0.
        assert_eq!(z[state_index(&layout, 0, 0)], 1.0);
        assert_eq!(z[state_index(&layout, 0, 1)], 2.0);
        assert_eq!(z[state_index(&layout, 0, 2)], 3.0);
        assert_eq!(z[state_index(&layout, 1, 1)], 0.0);
        // Control midpoint of [-2, 6] is 2.
        assert_eq!(z[control_index(&layout, 0, 1)], 2.0);
        // Free tf at 1.5x lower bound.
        assert_eq!(z[layout.tf_index().unwrap()], 1.5);
    }
}
