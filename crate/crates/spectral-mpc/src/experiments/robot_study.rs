//! Robot tuning studies: cost families, window lengths, integration step
//! sizes, initial conditions, and the closed-loop circle scenarios.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::collocation::CollocationGrid;
use crate::integrate::rk4_step;
use crate::models::robot::{self, RobotParams};
use crate::mpc::{
    build_cost, run_closed_loop, ClosedLoopLog, ControllerMode, CostKind, LinearizationPoint,
    MpcConfig, MpcError, MpcProblem, ReferenceGenerator, Scenario, Weights,
};
use crate::ocp::{
    BoundaryConstraint, DynamicsFn, Horizon, OcpProblem, Provenance, Trajectory,
};
use crate::sqp::{self, SolverOptions};
use crate::transcription::{
    control_index, recover_trajectory, state_index, transcribe_pseudospectral,
};

use super::reference::{CircleReference, LineReference};
use super::report::{fmt_float, CsvTable};

/// Which study to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobotStudy {
    CostTypes,
    WindowLength,
    DtSweep,
    InitialCondition,
    ClosedLoop,
}

impl RobotStudy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cost-types" => Some(Self::CostTypes),
            "window-length" => Some(Self::WindowLength),
            "dt-sweep" => Some(Self::DtSweep),
            "initial-condition" => Some(Self::InitialCondition),
            "closed-loop" => Some(Self::ClosedLoop),
            _ => None,
        }
    }
}

pub struct RobotStudyReport {
    pub tables: Vec<(String, CsvTable)>,
    pub logs: Vec<(String, ClosedLoopLog)>,
}

fn robot_dynamics(params: RobotParams) -> DynamicsFn {
    Arc::new(move |x: &[f64], u: &[f64], _t, dx: &mut [f64]| {
        let d = robot::dynamics(x, u[0], u[1], &params);
        dx.copy_from_slice(&d);
    })
}

fn study_solver_options() -> SolverOptions {
    SolverOptions {
        max_iterations: 300,
        constraint_tolerance: 1e-8,
        optimality_tolerance: 1e-8,
        ..Default::default()
    }
}

/// One open-loop window solve for the line-following task.
pub struct OpenLoopSolution {
    pub optimal: Trajectory,
    pub status: crate::sqp::SolverStatus,
    grid: CollocationGrid,
    controls_at_nodes: DMatrix<f64>,
    window: (f64, f64),
    params: RobotParams,
}

impl OpenLoopSolution {
    /// Control at time `t` from the optimal nodal values (polynomial
    /// interpolation on the LGL grid).
    pub fn control_at(&self, t: f64) -> [f64; 2] {
        let (t0, tf) = self.window;
        let tau = (2.0 * (t - t0) / (tf - t0) - 1.0).clamp(-1.0, 1.0);
        let mut u = [0.0; 2];
        for (c, out) in u.iter_mut().enumerate() {
            let col: Vec<f64> = (0..self.controls_at_nodes.nrows())
                .map(|j| self.controls_at_nodes[(j, c)])
                .collect();
            *out = self.grid.interpolate(&col, tau).unwrap_or(col[col.len() - 1]);
        }
        u
    }

    /// Integrate the true plant under the optimal control with a fixed RK4
    /// step `dt`, recording one row per step.
    pub fn integrate_plant_fixed_step(&self, x0: &[f64], dt: f64) -> Trajectory {
        let (t0, tf) = self.window;
        let steps = ((tf - t0) / dt).round().max(1.0) as usize;
        let params = self.params;
        let f = |t: f64, x: &[f64], dx: &mut [f64]| {
            let u = self.control_at(t);
            let d = robot::dynamics(x, u[0], u[1], &params);
            dx.copy_from_slice(&d);
        };
        let mut x = x0.to_vec();
        let mut times = Vec::with_capacity(steps + 1);
        let mut rows = Vec::with_capacity(steps + 1);
        let mut controls = Vec::with_capacity(steps + 1);
        times.push(t0);
        rows.push(x.clone());
        controls.push(self.control_at(t0).to_vec());
        let h = (tf - t0) / steps as f64;
        for k in 0..steps {
            let t = t0 + k as f64 * h;
            rk4_step(&f, t, &mut x, h);
            times.push(t + h);
            rows.push(x.clone());
            controls.push(self.control_at(t + h).to_vec());
        }
        let states = DMatrix::from_fn(rows.len(), 3, |r, c| rows[r][c]);
        let controls = DMatrix::from_fn(controls.len(), 2, |r, c| controls[r][c]);
        Trajectory {
            times,
            states,
            controls,
            cost: self.optimal.cost,
            provenance: Provenance::IntegratedPlant,
        }
    }
}

/// Solve one open-loop line-following window from `(0, y0, 0)`.
pub fn open_loop_line_solve(
    mode: ControllerMode,
    cost_type: u8,
    y0: f64,
    window: f64,
    order: usize,
) -> Result<OpenLoopSolution, MpcError> {
    let params = RobotParams::default();
    let reference: Arc<dyn ReferenceGenerator> = Arc::new(LineReference::default());
    let x0 = [0.0, y0, 0.0];

    let dynamics = match mode {
        ControllerMode::Nonlinear => robot_dynamics(params),
        ControllerMode::Linear => {
            // Linearize at the initial state with the reference feed-forward.
            let u_ref = reference.control_ref(0.0);
            crate::mpc::linearize(&robot_dynamics(params), 3, 2, &x0, &u_ref, 0.0).as_dynamics()
        }
    };

    let mut ocp = OcpProblem::new(3, 2, dynamics);
    ocp.t0 = 0.0;
    ocp.horizon = Horizon::Fixed(window);
    ocp.bolza_integrand = Some(build_cost(
        CostKind::Robot { cost_type, params },
        Weights::default(),
        reference.clone(),
    )?);
    ocp.initial_constraint = Some(BoundaryConstraint::fix_state(&x0));
    ocp.control_lower = vec![-robot::WHEEL_SPEED_LIMIT; 2];
    ocp.control_upper = vec![robot::WHEEL_SPEED_LIMIT; 2];
    ocp.initial_state_hint = x0.to_vec();
    let end_ref = reference.state_ref(window);
    ocp.terminal_state_hint = end_ref.iter().map(|v| Some(*v)).collect();

    let nlp = transcribe_pseudospectral(&ocp, order)?;
    let n_nodes = order + 1;
    let mut z0 = vec![0.0; nlp.n_vars];
    for j in 0..n_nodes {
        let frac = nlp.layout.state_fractions[j];
        let t_j = frac * window;
        for s in 0..3 {
            z0[state_index(&nlp.layout, s, j)] = x0[s] + frac * (end_ref[s] - x0[s]);
        }
        let u_ref = reference.control_ref(t_j);
        for c in 0..2 {
            z0[control_index(&nlp.layout, c, j)] = u_ref[c];
        }
    }

    let sol = sqp::solve(&nlp, &z0, &study_solver_options())?;
    let optimal = recover_trajectory(&nlp, &sol.z)?;
    let controls_at_nodes = optimal.controls.clone();
    Ok(OpenLoopSolution {
        optimal,
        status: sol.status,
        grid: CollocationGrid::new(order)
            .map_err(crate::transcription::TranscriptionError::Collocation)?,
        controls_at_nodes,
        window: (0.0, window),
        params,
    })
}

fn mode_name(mode: ControllerMode) -> &'static str {
    match mode {
        ControllerMode::Nonlinear => "nonlinear",
        ControllerMode::Linear => "linear",
    }
}

/// Cost-family and window-length study: open-loop solves from y0 = 6 for all
/// five cost types, both controller modes, windows of 1, 5 and 10 s.
pub fn cost_type_study(order: usize) -> Result<CsvTable, MpcError> {
    let mut table = CsvTable::new(&[
        "cost_type",
        "mode",
        "window_s",
        "status",
        "final_y_error",
        "max_y_error_after_transient",
    ]);
    for window in [1.0, 5.0, 10.0] {
        for cost_type in 1..=5u8 {
            for mode in [ControllerMode::Nonlinear, ControllerMode::Linear] {
                let sol = open_loop_line_solve(mode, cost_type, 6.0, window, order)?;
                let last = sol.optimal.times.len() - 1;
                let final_y_error = (sol.optimal.states[(last, 1)] - 5.0).abs();
                // Largest y deviation in the second half of the window.
                let mut tail_err = 0.0f64;
                for (k, &t) in sol.optimal.times.iter().enumerate() {
                    if t >= 0.5 * window {
                        tail_err = tail_err.max((sol.optimal.states[(k, 1)] - 5.0).abs());
                    }
                }
                table.push_row(vec![
                    cost_type.to_string(),
                    mode_name(mode).to_string(),
                    fmt_float(window),
                    format!("{:?}", sol.status),
                    fmt_float(final_y_error),
                    fmt_float(tail_err),
                ]);
            }
        }
    }
    Ok(table)
}

/// Integration-step study: integrate the optimal window at several fixed RK4
/// steps and report the deviation from the optimal prediction.
pub fn dt_sweep_study(order: usize) -> Result<CsvTable, MpcError> {
    let mut table = CsvTable::new(&["mode", "dt_s", "final_gap_m", "max_gap_m"]);
    for mode in [ControllerMode::Nonlinear, ControllerMode::Linear] {
        let sol = open_loop_line_solve(mode, 5, 6.0, 5.0, order)?;
        for dt in [0.1, 0.01, 0.001] {
            let integrated = sol.integrate_plant_fixed_step(&[0.0, 6.0, 0.0], dt);
            let mut max_gap = 0.0f64;
            for (k, &t) in integrated.times.iter().enumerate() {
                let pred = sol.optimal.state_at(t);
                let gap = ((integrated.states[(k, 0)] - pred[0]).powi(2)
                    + (integrated.states[(k, 1)] - pred[1]).powi(2))
                .sqrt();
                max_gap = max_gap.max(gap);
            }
            let last = integrated.times.len() - 1;
            let pred_end = sol.optimal.state_at(*integrated.times.last().unwrap());
            let final_gap = ((integrated.states[(last, 0)] - pred_end[0]).powi(2)
                + (integrated.states[(last, 1)] - pred_end[1]).powi(2))
            .sqrt();
            table.push_row(vec![
                mode_name(mode).to_string(),
                fmt_float(dt),
                fmt_float(final_gap),
                fmt_float(max_gap),
            ]);
        }
    }
    Ok(table)
}

/// Initial-condition sensitivity: y0 from 0 to 10 in steps of 0.1, errors of
/// the optimal and the plant-integrated responses at 1..=5 s into the window,
/// for both controller modes.
pub fn initial_condition_study(order: usize) -> Result<CsvTable, MpcError> {
    let mut header: Vec<String> = vec!["y0".into()];
    for mode in ["nonlinear", "linear"] {
        for series in ["optimal", "integrated"] {
            for t in 1..=5 {
                header.push(format!("{mode}_{series}_err_{t}s"));
            }
        }
    }
    let mut table = CsvTable {
        header,
        rows: Vec::new(),
    };
    for i in 0..=100 {
        let y0 = i as f64 * 0.1;
        let mut row = vec![fmt_float(y0)];
        for mode in [ControllerMode::Nonlinear, ControllerMode::Linear] {
            let sol = open_loop_line_solve(mode, 5, y0, 5.0, order)?;
            let integrated = sol.integrate_plant_fixed_step(&[0.0, y0, 0.0], 0.01);
            for t in 1..=5 {
                let v = sol.optimal.state_at(t as f64)[1] - 5.0;
                row.push(fmt_float(v.abs()));
            }
            for t in 1..=5 {
                let v = integrated.state_at(t as f64)[1] - 5.0;
                row.push(fmt_float(v.abs()));
            }
        }
        table.rows.push(row);
    }
    Ok(table)
}

/// Closed-loop circle scenarios. Scenario 1 starts exactly on the reference;
/// scenarios 2 and 3 start off the path with heading 0, as in the open-loop
/// studies.
pub fn circle_scenario_initial_state(id: u8) -> Vec<f64> {
    match id {
        1 => {
            let r = CircleReference::default();
            r.state_ref(0.0)
        }
        2 => vec![-2.0, 4.0, 0.0],
        _ => vec![0.0, 20.0, 0.0],
    }
}

pub fn robot_mpc_problem(cost_type: u8) -> MpcProblem {
    let params = RobotParams::default();
    MpcProblem {
        state_dim: 3,
        control_dim: 2,
        dynamics: robot_dynamics(params),
        plant_dim: 3,
        plant_dynamics: robot_dynamics(params),
        state_lower: vec![f64::NEG_INFINITY; 3],
        state_upper: vec![f64::INFINITY; 3],
        control_lower: vec![-robot::WHEEL_SPEED_LIMIT; 2],
        control_upper: vec![robot::WHEEL_SPEED_LIMIT; 2],
        cost_kind: CostKind::Robot { cost_type, params },
        weights: Weights::default(),
    }
}

pub fn circle_scenario(id: u8, duration: f64) -> Scenario {
    let reference = Arc::new(CircleReference::default());
    let center = reference.center;
    let radius = reference.radius;
    Scenario {
        initial_plant_state: circle_scenario_initial_state(id),
        duration,
        reference,
        control_filter: None,
        bounds_update: None,
        tracking_error: Arc::new(move |x: &[f64], r: &[f64]| {
            let radial = (((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt()
                - radius)
                .abs();
            let point = ((x[0] - r[0]).powi(2) + (x[1] - r[1]).powi(2)).sqrt();
            (radial, point)
        }),
        stop_when: None,
    }
}

pub fn robot_mpc_config(mode: ControllerMode, order: usize) -> MpcConfig {
    MpcConfig {
        collocation_order: order,
        mode,
        linearization: LinearizationPoint::Reference,
        solver: SolverOptions {
            max_iterations: 60,
            constraint_tolerance: 1e-9,
            optimality_tolerance: 1e-9,
            ..Default::default()
        },
        ..Default::default()
    }
}

/// The three closed-loop circle scenarios in both controller modes.
pub fn closed_loop_study(
    order: usize,
    duration: f64,
) -> Result<(CsvTable, Vec<(String, ClosedLoopLog)>), MpcError> {
    let mut table = CsvTable::new(&[
        "scenario",
        "mode",
        "completed",
        "final_radial_error_m",
        "min_radial_error_after_half_m",
        "max_wheel_speed",
    ]);
    let mut logs = Vec::new();
    for id in 1..=3u8 {
        for mode in [ControllerMode::Nonlinear, ControllerMode::Linear] {
            let problem = robot_mpc_problem(5);
            let config = robot_mpc_config(mode, order);
            let scenario = circle_scenario(id, duration);
            let log = run_closed_loop(&config, &problem, &scenario)?;
            let final_radial = log.records.last().map(|r| r.track_err_pos).unwrap_or(f64::NAN);
            let min_tail = log
                .records
                .iter()
                .filter(|r| r.t >= 0.5 * duration)
                .map(|r| r.track_err_pos)
                .fold(f64::INFINITY, f64::min);
            let max_wheel = log
                .records
                .iter()
                .flat_map(|r| r.applied_control.iter())
                .fold(0.0f64, |a, v| a.max(v.abs()));
            table.push_row(vec![
                id.to_string(),
                mode_name(mode).to_string(),
                log.completed.to_string(),
                fmt_float(final_radial),
                fmt_float(min_tail),
                fmt_float(max_wheel),
            ]);
            logs.push((format!("circle_scenario_{id}_{}", mode_name(mode)), log));
        }
    }
    Ok((table, logs))
}

/// Entry point for the CLI `sweep --study robot-*` commands.
pub fn run_robot_study(study: RobotStudy, order: usize) -> Result<RobotStudyReport, MpcError> {
    let mut tables = Vec::new();
    let mut logs = Vec::new();
    match study {
        RobotStudy::CostTypes | RobotStudy::WindowLength => {
            tables.push(("cost_types".to_string(), cost_type_study(order)?));
        }
        RobotStudy::DtSweep => {
            tables.push(("dt_sweep".to_string(), dt_sweep_study(order)?));
        }
        RobotStudy::InitialCondition => {
            tables.push((
                "initial_condition".to_string(),
                initial_condition_study(order)?,
            ));
        }
        RobotStudy::ClosedLoop => {
            let (table, l) = closed_loop_study(order, 40.0)?;
            tables.push(("closed_loop".to_string(), table));
            logs = l;
        }
    }
    Ok(RobotStudyReport { tables, logs })
}
