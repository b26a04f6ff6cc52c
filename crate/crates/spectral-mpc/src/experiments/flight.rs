//! Fault-tolerant flight scenarios: stuck-throttle cases flown by the same
//! receding-horizon controller with FDI-driven constraint reconfiguration.

use std::sync::Arc;

use crate::models::aircraft::{self, AircraftParams};
use crate::mpc::{
    run_closed_loop, ClosedLoopLog, ControllerMode, CostKind, LinearizationPoint, MpcConfig,
    MpcError, MpcProblem, Scenario, Weights,
};
use crate::ocp::DynamicsFn;
use crate::sqp::SolverOptions;

use super::faults::{apply_fault, fdi_messages_for, update_constraints_from_fdi, FaultScript};
use super::reference::FlightProfile;
use super::report::{fmt_float, rms, std_dev, CsvTable};

/// Longitudinal state/control box constraints for the windowed problem.
pub fn flight_state_bounds() -> (Vec<f64>, Vec<f64>) {
    (
        vec![1.0, 30.0, -3.0, f64::NEG_INFINITY, f64::NEG_INFINITY, -20.0],
        vec![300.0, 100.0, 3.0, f64::INFINITY, f64::INFINITY, 20.0],
    )
}

pub fn flight_control_bounds() -> (Vec<f64>, Vec<f64>) {
    (vec![0.0, -200.0], vec![1.0, 200.0])
}

fn aircraft_dynamics6(params: AircraftParams) -> DynamicsFn {
    Arc::new(move |x: &[f64], u: &[f64], _t, dx: &mut [f64]| {
        let d = aircraft::dynamics6(x, u, &params);
        dx.copy_from_slice(&d);
    })
}

fn aircraft_dynamics7(params: AircraftParams) -> DynamicsFn {
    Arc::new(move |x: &[f64], u: &[f64], _t, dx: &mut [f64]| {
        let d = aircraft::dynamics7(x, u, &params);
        dx.copy_from_slice(&d);
    })
}

pub fn flight_mpc_problem(params: &AircraftParams) -> MpcProblem {
    let (state_lower, state_upper) = flight_state_bounds();
    let (control_lower, control_upper) = flight_control_bounds();
    MpcProblem {
        state_dim: aircraft::STATE_DIM,
        control_dim: aircraft::CONTROL_DIM,
        dynamics: aircraft_dynamics6(*params),
        plant_dim: aircraft::PLANT_DIM,
        plant_dynamics: aircraft_dynamics7(*params),
        state_lower,
        state_upper,
        control_lower,
        control_upper,
        cost_kind: CostKind::Flight,
        weights: Weights::flight_default(),
    }
}

pub fn flight_mpc_config() -> MpcConfig {
    MpcConfig {
        prediction_horizon: 5.0,
        control_horizon: 5.0,
        collocation_order: 50,
        sample_period: 0.1,
        plant_dt: 0.01,
        mode: ControllerMode::Nonlinear,
        linearization: LinearizationPoint::PlantState,
        solver: SolverOptions {
            max_iterations: 80,
            constraint_tolerance: 1e-6,
            optimality_tolerance: 1e-5,
            ..Default::default()
        },
        ..Default::default()
    }
}

/// The seven stuck-throttle cases: scenario 1 is fault-free, 2–6 freeze the
/// throttle at 70/50/35/30/20 % from the start, scenario 7 freezes it at
/// 20 % eighty seconds into the flight.
pub fn scenario_fault_script(id: u8) -> FaultScript {
    match id {
        1 => FaultScript::default(),
        2 => FaultScript::stuck_at(0.0, 0, 0.70),
        3 => FaultScript::stuck_at(0.0, 0, 0.50),
        4 => FaultScript::stuck_at(0.0, 0, 0.35),
        5 => FaultScript::stuck_at(0.0, 0, 0.30),
        6 => FaultScript::stuck_at(0.0, 0, 0.20),
        7 => FaultScript::stuck_at(80.0, 0, 0.20),
        _ => panic!("flight scenarios are numbered 1..=7"),
    }
}

pub fn flight_scenario(
    id: u8,
    profile: &FlightProfile,
    params: &AircraftParams,
) -> Result<Scenario, MpcError> {
    let script = scenario_fault_script(id);
    let (lo, hi) = flight_control_bounds();
    script
        .validate(&lo, &hi)
        .map_err(MpcError::Config)?;
    let trim = aircraft::trim(params, profile.airspeed, profile.waypoints[0].1)
        .map_err(|e| MpcError::Config(e.to_string()))?;
    let initial = trim.plant_state(profile.waypoints[0].1, profile.airspeed);
    let messages = fdi_messages_for(&script, 0.0);

    let control_filter = if script.is_empty() {
        None
    } else {
        let script = script.clone();
        Some(Arc::new(move |t: f64, u: &[f64]| apply_fault(&script, t, u))
            as Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>)
    };
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
        }) as Arc<dyn Fn(f64, &mut [f64], &mut [f64]) + Send + Sync>)
    };

    Ok(Scenario {
        initial_plant_state: initial.to_vec(),
        duration: profile.duration(),
        reference: Arc::new(profile.clone()),
        control_filter,
        bounds_update,
        tracking_error: Arc::new(|x: &[f64], r: &[f64]| {
            let alt_err = (x[aircraft::IDX_ALTITUDE] - r[aircraft::IDX_ALTITUDE]).abs();
            let vt_err = (aircraft::true_airspeed(x) - aircraft::true_airspeed(r)).abs();
            (alt_err, vt_err)
        }),
        stop_when: Some(Arc::new(|_t: f64, x: &[f64]| {
            x[aircraft::IDX_ALTITUDE] < 1.0
        })),
    })
}

/// Per-scenario summary row; the columns of `summary.csv`.
#[derive(Debug, Clone)]
pub struct FlightSummaryRow {
    pub scenario: u8,
    pub min_vt: f64,
    pub max_alpha_deg: f64,
    pub elev_activity_std_deg: f64,
    pub alt_rms_m: f64,
    pub mean_solve_ms: f64,
    pub completed: bool,
}

pub struct FlightReport {
    pub runs: Vec<(u8, ClosedLoopLog)>,
    pub summary: Vec<FlightSummaryRow>,
}

impl FlightReport {
    pub fn summary_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "scenario",
            "min_Vt",
            "max_alpha_deg",
            "elev_activity_std_deg",
            "alt_rms_m",
            "mean_solve_ms",
            "completed",
        ]);
        for r in &self.summary {
            t.push_row(vec![
                r.scenario.to_string(),
                fmt_float(r.min_vt),
                fmt_float(r.max_alpha_deg),
                fmt_float(r.elev_activity_std_deg),
                fmt_float(r.alt_rms_m),
                fmt_float(r.mean_solve_ms),
                r.completed.to_string(),
            ]);
        }
        t
    }

    pub fn row(&self, scenario: u8) -> Option<&FlightSummaryRow> {
        self.summary.iter().find(|r| r.scenario == scenario)
    }

    pub fn log(&self, scenario: u8) -> Option<&ClosedLoopLog> {
        self.runs
            .iter()
            .find(|(id, _)| *id == scenario)
            .map(|(_, l)| l)
    }
}

pub fn summarize_flight_log(id: u8, log: &ClosedLoopLog, profile: &FlightProfile) -> FlightSummaryRow {
    let min_vt = log
        .records
        .iter()
        .map(|r| aircraft::true_airspeed(&r.plant_state))
        .fold(f64::INFINITY, f64::min);
    let max_alpha = log
        .records
        .iter()
        .map(|r| aircraft::alpha_deg(&r.plant_state))
        .fold(f64::NEG_INFINITY, f64::max);
    let elev_std = std_dev(
        log.records
            .iter()
            .map(|r| r.plant_state[aircraft::IDX_ELEVATOR])
            .collect::<Vec<_>>()
            .into_iter(),
    );
    let alt_rms = rms(log
        .records
        .iter()
        .map(|r| r.plant_state[aircraft::IDX_ALTITUDE] - profile.altitude_and_rate(r.t).0)
        .collect::<Vec<_>>()
        .into_iter());
    let mean_solve = if log.records.is_empty() {
        0.0
    } else {
        log.records.iter().map(|r| r.solve_time_ms).sum::<f64>() / log.records.len() as f64
    };
    FlightSummaryRow {
        scenario: id,
        min_vt,
        max_alpha_deg: max_alpha,
        elev_activity_std_deg: elev_std,
        alt_rms_m: alt_rms,
        mean_solve_ms: mean_solve,
        completed: log.completed,
    }
}

/// Run the selected scenarios sequentially and assemble the report in
/// scenario order.
pub fn run_flight_scenarios(ids: &[u8]) -> Result<FlightReport, MpcError> {
    let params = AircraftParams::default();
    let profile = FlightProfile::default();
    let problem = flight_mpc_problem(&params);
    let config = flight_mpc_config();
    let mut runs = Vec::with_capacity(ids.len());
    let mut summary = Vec::with_capacity(ids.len());
    for &id in ids {
        let scenario = flight_scenario(id, &profile, &params)?;
        let log = run_closed_loop(&config, &problem, &scenario)?;
        summary.push(summarize_flight_log(id, &log, &profile));
        runs.push((id, log));
    }
    Ok(FlightReport { runs, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_scripts_match_the_study_plan() {
        assert!(scenario_fault_script(1).is_empty());
        let s6 = scenario_fault_script(6);
        assert_eq!(s6.events[0].onset, 0.0);
        assert_eq!(s6.events[0].stuck_value, 0.20);
        let s7 = scenario_fault_script(7);
        assert_eq!(s7.events[0].onset, 80.0);
        assert_eq!(s7.events[0].stuck_value, 0.20);
    }

    #[test]
    fn trim_initial_state_is_level() {
        let params = AircraftParams::default();
        let profile = FlightProfile::default();
        let scenario = flight_scenario(1, &profile, &params).unwrap();
        let x = &scenario.initial_plant_state;
        assert_eq!(x[aircraft::IDX_ALTITUDE], 200.0);
        assert_eq!(x[aircraft::IDX_VN], 50.0);
        assert_eq!(x[aircraft::IDX_VD], 0.0);
    }

    #[test]
    fn table_bounds_match_the_longitudinal_constraint_set() {
        let (lo, hi) = flight_state_bounds();
        assert_eq!((lo[0], hi[0]), (1.0, 300.0));
        assert_eq!((lo[1], hi[1]), (30.0, 100.0));
        assert_eq!((lo[2], hi[2]), (-3.0, 3.0));
        assert!(lo[3].is_infinite() && hi[4].is_infinite());
        assert_eq!((lo[5], hi[5]), (-20.0, 20.0));
        let (clo, chi) = flight_control_bounds();
        assert_eq!((clo[0], chi[0]), (0.0, 1.0));
        assert_eq!((clo[1], chi[1]), (-200.0, 200.0));
    }
}
