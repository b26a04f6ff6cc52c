//! JSON scenario configuration: sections `model`, `mpc`, `reference`,
//! `faults`, `solver`, `output`, building into the engine's runtime types.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::models::aircraft::{self, AircraftParams};
use crate::models::robot::RobotParams;
use crate::mpc::{
    ControllerMode, CostKind, LinearizationPoint, MpcConfig, MpcError, MpcProblem,
    ReferenceGenerator, Scenario, Weights,
};
use crate::sqp::SolverOptions;

use super::faults::{apply_fault, fdi_messages_for, update_constraints_from_fdi, FaultScript};
use super::flight;
use super::reference::{CircleReference, FlightProfile, LineReference};
use super::robot_study;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "id")]
pub enum ModelSection {
    Robot {
        #[serde(default)]
        params: RobotParams,
    },
    Aircraft {
        #[serde(default)]
        params: AircraftParams,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MpcSection {
    pub prediction_horizon: f64,
    pub control_horizon: f64,
    pub collocation_order: usize,
    pub sample_period: f64,
    pub plant_dt: f64,
    /// "nonlinear" or "linear".
    pub mode: String,
    /// "plant-state" or "reference".
    pub linearization: String,
    pub cost_type: u8,
    pub weights: Weights,
}

impl Default for MpcSection {
    fn default() -> Self {
        Self {
            prediction_horizon: 5.0,
            control_horizon: 5.0,
            collocation_order: 50,
            sample_period: 0.1,
            plant_dt: 0.01,
            mode: "nonlinear".to_string(),
            linearization: "plant-state".to_string(),
            cost_type: 5,
            weights: Weights::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "id")]
pub enum ReferenceSection {
    Line(LineReference),
    Circle(CircleReference),
    FlightProfile(FlightProfile),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_iterations: Option<usize>,
    pub constraint_tolerance: Option<f64>,
    pub optimality_tolerance: Option<f64>,
    pub finite_difference_step: Option<f64>,
    pub merit_penalty_growth: Option<f64>,
    pub budget_ms: Option<f64>,
}

impl SolverSection {
    pub fn to_options(&self) -> SolverOptions {
        let d = SolverOptions::default();
        SolverOptions {
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            constraint_tolerance: self.constraint_tolerance.unwrap_or(d.constraint_tolerance),
            optimality_tolerance: self.optimality_tolerance.unwrap_or(d.optimality_tolerance),
            finite_difference_step: self
                .finite_difference_step
                .unwrap_or(d.finite_difference_step),
            merit_penalty_growth: self.merit_penalty_growth.unwrap_or(d.merit_penalty_growth),
            budget_ms: self.budget_ms,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: Option<String>,
    pub prefix: Option<String>,
}

/// A complete closed-loop run description as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub mpc: MpcSection,
    pub reference: ReferenceSection,
    #[serde(default)]
    pub faults: FaultScript,
    #[serde(default)]
    pub fdi_latency: f64,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    pub initial_state: Vec<f64>,
    pub duration: f64,
}

impl ScenarioConfig {
    pub fn from_json(json: &str) -> Result<Self, MpcError> {
        serde_json::from_str(json).map_err(|e| MpcError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, MpcError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MpcError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn state_names(&self) -> Vec<&'static str> {
        match self.model {
            ModelSection::Robot { .. } => vec!["x", "y", "psi"],
            ModelSection::Aircraft { .. } => {
                vec!["h", "V_N", "V_D", "theta", "q", "delta_e", "x_N"]
            }
        }
    }

    pub fn control_names(&self) -> Vec<&'static str> {
        match self.model {
            ModelSection::Robot { .. } => vec!["omega_R", "omega_L"],
            ModelSection::Aircraft { .. } => vec!["delta_th", "d_delta_e"],
        }
    }

    /// Assemble the engine inputs: configuration, system, and scenario.
    pub fn build(&self) -> Result<(MpcConfig, MpcProblem, Scenario), MpcError> {
        let mode = match self.mpc.mode.as_str() {
            "nonlinear" => ControllerMode::Nonlinear,
            "linear" => ControllerMode::Linear,
            other => return Err(MpcError::Config(format!("unknown mode '{other}'"))),
        };
        let linearization = match self.mpc.linearization.as_str() {
            "plant-state" => LinearizationPoint::PlantState,
            "reference" => LinearizationPoint::Reference,
            other => {
                return Err(MpcError::Config(format!(
                    "unknown linearization point '{other}'"
                )))
            }
        };
        let config = MpcConfig {
            prediction_horizon: self.mpc.prediction_horizon,
            control_horizon: self.mpc.control_horizon,
            collocation_order: self.mpc.collocation_order,
            sample_period: self.mpc.sample_period,
            plant_dt: self.mpc.plant_dt,
            mode,
            linearization,
            solver: self.solver.to_options(),
        };
        config.validate()?;

        let reference: Arc<dyn ReferenceGenerator> = match &self.reference {
            ReferenceSection::Line(r) => Arc::new(r.clone()),
            ReferenceSection::Circle(r) => Arc::new(r.clone()),
            ReferenceSection::FlightProfile(r) => Arc::new(r.clone()),
        };

        let (problem, tracking): (MpcProblem, Arc<dyn Fn(&[f64], &[f64]) -> (f64, f64) + Send + Sync>) =
            match &self.model {
                ModelSection::Robot { params } => {
                    let mut p = robot_study::robot_mpc_problem(self.mpc.cost_type);
                    let params = *params;
                    p.dynamics = Arc::new(move |x: &[f64], u: &[f64], _t, dx: &mut [f64]| {
                        let d = crate::models::robot::dynamics(x, u[0], u[1], &params);
                        dx.copy_from_slice(&d);
                    });
                    p.plant_dynamics = p.dynamics.clone();
                    p.cost_kind = CostKind::Robot {
                        cost_type: self.mpc.cost_type,
                        params,
                    };
                    p.weights = self.mpc.weights;
                    let err: Arc<dyn Fn(&[f64], &[f64]) -> (f64, f64) + Send + Sync> =
                        Arc::new(|x: &[f64], r: &[f64]| {
                            let pos =
                                ((x[0] - r[0]).powi(2) + (x[1] - r[1]).powi(2)).sqrt();
                            (pos, (x[2] - r[2]).abs())
                        });
                    (p, err)
                }
                ModelSection::Aircraft { params } => {
                    let mut p = flight::flight_mpc_problem(params);
                    p.weights = self.mpc.weights;
                    let err: Arc<dyn Fn(&[f64], &[f64]) -> (f64, f64) + Send + Sync> =
                        Arc::new(|x: &[f64], r: &[f64]| {
                            let alt = (x[aircraft::IDX_ALTITUDE] - r[aircraft::IDX_ALTITUDE])
                                .abs();
                            let vt = (aircraft::true_airspeed(x)
                                - aircraft::true_airspeed(r))
                            .abs();
                            (alt, vt)
                        });
                    (p, err)
                }
            };

        if self.initial_state.len() != problem.plant_dim {
            return Err(MpcError::Config(format!(
                "initial state has {} entries, plant expects {}",
                self.initial_state.len(),
                problem.plant_dim
            )));
        }
        self.faults
            .validate(&problem.control_lower, &problem.control_upper)
            .map_err(MpcError::Config)?;

        let control_filter = if self.faults.is_empty() {
            None
        } else {
            let script = self.faults.clone();
            Some(Arc::new(move |t: f64, u: &[f64]| apply_fault(&script, t, u))
                as Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>)
        };
        let messages = fdi_messages_for(&self.faults, self.fdi_latency);
        let bounds_update = if messages.is_empty() {
            None
        } else {
            Some(Arc::new(move |t: f64, lo: &mut [f64], hi: &mut [f64]| {
                for msg in &messages {
                    if t >= msg.detection_time {
                        let (l, h) = update_constraints_from_fdi(msg, lo, hi);
                        lo.copy_from_slice(&l);
                        hi.copy_from_slice(&h);
                    }
                }
            })
                as Arc<dyn Fn(f64, &mut [f64], &mut [f64]) + Send + Sync>)
        };

        let stop_when = match &self.model {
            ModelSection::Aircraft { .. } => Some(Arc::new(|_t: f64, x: &[f64]| {
                x[aircraft::IDX_ALTITUDE] < 1.0
            })
                as Arc<dyn Fn(f64, &[f64]) -> bool + Send + Sync>),
            ModelSection::Robot { .. } => None,
        };

        let scenario = Scenario {
            initial_plant_state: self.initial_state.clone(),
            duration: self.duration,
            reference,
            control_filter,
            bounds_update,
            tracking_error: tracking,
            stop_when,
        };
        Ok((config, problem, scenario))
    }
}
