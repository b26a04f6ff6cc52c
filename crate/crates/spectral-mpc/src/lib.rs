//! Pseudospectral trajectory optimization and nonlinear model predictive control.
//!
//! The crate is organized around a pipeline:
//!
//! 1. [`ocp`] — describe a continuous-time optimal control problem (Bolza cost,
//!    dynamics, endpoint/path/box constraints).
//! 2. [`transcription`] — turn it into a finite-dimensional NLP by one of four
//!    direct methods: Legendre-Gauss-Lobatto pseudospectral collocation, Euler
//!    collocation, direct single shooting, or direct multiple shooting.
//! 3. [`sqp`] — solve the NLP with a damped-BFGS sequential quadratic
//!    programming method and an active-set QP subproblem solver.
//! 4. [`mpc`] — wrap solve/apply/integrate into a receding-horizon loop, in
//!    nonlinear or linearized mode.
//! 5. [`experiments`] — reference generators, actuator-fault injection with
//!    constraint reconfiguration, and the sweep/scenario harnesses.
//!
//! Plant models (a Brachistochrone bead, a differential-drive robot, and a
//! longitudinal fixed-wing aircraft) live in [`models`]. The `spectral-mpc`
//! binary exposes the harnesses on the command line; the `examples/` directory
//! shows library usage per capability.

pub mod collocation;
pub mod integrate;
pub mod ocp;
pub mod transcription;
pub mod sqp;
pub mod models;
pub mod mpc;
pub mod experiments;
pub mod cli;

pub use collocation::CollocationGrid;
pub use ocp::{OcpProblem, Trajectory};
pub use sqp::{NlpSolution, SolverOptions, SolverStatus};
pub use transcription::NlpProblem;
