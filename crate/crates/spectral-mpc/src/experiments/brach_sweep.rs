//! Discretization sweep on the Brachistochrone: each method solved over a
//! range of grid sizes, with errors measured against the analytic cycloid.

use crate::models::brachistochrone::{self, BrachParams};
use crate::sqp::{self, SolverOptions};
use crate::transcription::{
    default_initial_guess, recover_trajectory, transcribe_euler, transcribe_multiple_shooting,
    transcribe_pseudospectral, transcribe_single_shooting, ControlInterp, NlpProblem,
    ShootingOptions, VarKind,
};

use super::report::{fmt_float, CsvTable};

/// One (method, discretization) cell of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMethod {
    Pseudospectral { order: usize },
    Euler { intervals: usize },
    /// Zero-order-hold control parameterization: a piecewise-linear schedule
    /// can represent the optimal wire angle (linear in time) exactly, which
    /// would make the control-point count irrelevant.
    SingleShooting { control_points: usize, steps: usize },
    MultipleShooting {
        segments: usize,
        control_points: usize,
        steps: usize,
    },
}

impl SweepMethod {
    pub fn family(&self) -> &'static str {
        match self {
            SweepMethod::Pseudospectral { .. } => "pseudospectral",
            SweepMethod::Euler { .. } => "euler",
            SweepMethod::SingleShooting { .. } => "single-shooting",
            SweepMethod::MultipleShooting { .. } => "multiple-shooting",
        }
    }

    pub fn discretization(&self) -> String {
        match self {
            SweepMethod::Pseudospectral { order } => format!("N={order}"),
            SweepMethod::Euler { intervals } => format!("N={intervals}"),
            SweepMethod::SingleShooting {
                control_points,
                steps,
            } => format!("Nu={control_points},Nx={steps}"),
            SweepMethod::MultipleShooting {
                segments,
                control_points,
                steps,
            } => format!("M={segments},Nu={control_points},Nx={steps}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub method: String,
    pub discretization: String,
    pub status: String,
    pub final_time: f64,
    pub final_time_error: f64,
    pub max_error_x: f64,
    pub max_error_y: f64,
    pub endpoint_error: f64,
    pub iterations: usize,
    pub solve_ms: f64,
}

#[derive(Debug, Clone)]
pub struct BrachSweepReport {
    pub analytic_final_time: f64,
    pub cells: Vec<SweepCell>,
}

impl BrachSweepReport {
    pub fn cell(&self, family: &str, discretization: &str) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.method == family && c.discretization == discretization)
    }

    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "method",
            "discretization",
            "status",
            "tf",
            "tf_error",
            "max_err_x",
            "max_err_y",
            "endpoint_error",
            "iterations",
            "solve_ms",
        ]);
        for c in &self.cells {
            t.push_row(vec![
                c.method.clone(),
                c.discretization.clone(),
                c.status.clone(),
                fmt_float(c.final_time),
                fmt_float(c.final_time_error),
                fmt_float(c.max_error_x),
                fmt_float(c.max_error_y),
                fmt_float(c.endpoint_error),
                c.iterations.to_string(),
                fmt_float(c.solve_ms),
            ]);
        }
        t
    }
}

/// The default grid ranges the `sweep --study brach` command runs.
pub fn default_methods() -> Vec<SweepMethod> {
    let mut m = Vec::new();
    for order in [5, 10, 20, 50] {
        m.push(SweepMethod::Pseudospectral { order });
    }
    for intervals in [5, 10, 20, 50] {
        m.push(SweepMethod::Euler { intervals });
    }
    for control_points in [5, 10, 20] {
        m.push(SweepMethod::SingleShooting {
            control_points,
            steps: 200,
        });
    }
    for (segments, control_points) in [(2, 2), (4, 4), (8, 4)] {
        m.push(SweepMethod::MultipleShooting {
            segments,
            control_points,
            steps: 160,
        });
    }
    m
}

fn transcribe(
    method: &SweepMethod,
    problem: &crate::ocp::OcpProblem,
) -> Result<NlpProblem, crate::transcription::TranscriptionError> {
    match *method {
        SweepMethod::Pseudospectral { order } => transcribe_pseudospectral(problem, order),
        SweepMethod::Euler { intervals } => transcribe_euler(problem, intervals),
        SweepMethod::SingleShooting {
            control_points,
            steps,
        } => transcribe_single_shooting(
            problem,
            control_points,
            steps,
            ShootingOptions {
                control_interp: ControlInterp::ZeroOrderHold,
            },
        ),
        SweepMethod::MultipleShooting {
            segments,
            control_points,
            steps,
        } => transcribe_multiple_shooting(
            problem,
            segments,
            control_points,
            steps,
            ShootingOptions {
                control_interp: ControlInterp::ZeroOrderHold,
            },
        ),
    }
}

/// Initial guess for a cell: the default guess, refined by sampling the
/// previous cell's solution trajectory when one exists in the same family
/// (grid-continuation warm start).
fn guess_for(
    problem: &crate::ocp::OcpProblem,
    nlp: &NlpProblem,
    previous: Option<&crate::ocp::Trajectory>,
) -> Vec<f64> {
    let mut z0 = default_initial_guess(problem, &nlp.layout);
    if let Some(traj) = previous {
        let tf_prev = *traj.times.last().unwrap();
        for (idx, kind) in nlp.layout.entries().iter().enumerate() {
            match *kind {
                VarKind::State { state, node } => {
                    let t = nlp.layout.state_fractions[node] * tf_prev;
                    z0[idx] = traj.state_at(t)[state];
                }
                VarKind::Control { control, node } => {
                    let t = nlp.layout.control_fractions[node] * tf_prev;
                    z0[idx] = traj.control_at(t)[control];
                }
                VarKind::FinalTime => z0[idx] = tf_prev,
            }
        }
    }
    z0
}

/// Run every requested cell exactly once, recording failures without
/// interrupting the sweep.
pub fn run_brachistochrone_sweep(
    params: &BrachParams,
    methods: &[SweepMethod],
    opts: &SolverOptions,
) -> BrachSweepReport {
    let problem = brachistochrone::ocp(params);
    let tf_exact = brachistochrone::analytic_final_time(params.target_x, params.gravity)
        .expect("valid parameters");
    let (xf_exact, yf_exact) =
        brachistochrone::analytic_position(tf_exact, params.target_x, params.gravity)
            .expect("valid parameters");

    let mut cells = Vec::with_capacity(methods.len());
    let mut last_in_family: Option<(&'static str, crate::ocp::Trajectory)> = None;

    for method in methods {
        let family = method.family();
        let cell = (|| -> Result<(SweepCell, Option<crate::ocp::Trajectory>), String> {
            let nlp = transcribe(method, &problem).map_err(|e| e.to_string())?;
            let carry = last_in_family
                .as_ref()
                .filter(|(f, _)| *f == family)
                .map(|(_, t)| t);
            let z0 = guess_for(&problem, &nlp, carry);
            let sol = sqp::solve(&nlp, &z0, opts).map_err(|e| e.to_string())?;
            let traj = recover_trajectory(&nlp, &sol.z).map_err(|e| e.to_string())?;
            let tf = *traj.times.last().unwrap();
            let mut max_err_x = 0.0f64;
            let mut max_err_y = 0.0f64;
            for (k, &t) in traj.times.iter().enumerate() {
                let (xa, ya) =
                    brachistochrone::analytic_position(t, params.target_x, params.gravity)
                        .map_err(|e| e.to_string())?;
                max_err_x = max_err_x.max((traj.states[(k, 0)] - xa).abs());
                max_err_y = max_err_y.max((traj.states[(k, 1)] - ya).abs());
            }
            let last = traj.times.len() - 1;
            let endpoint_error = ((traj.states[(last, 0)] - xf_exact).powi(2)
                + (traj.states[(last, 1)] - yf_exact).powi(2))
            .sqrt();
            Ok((
                SweepCell {
                    method: family.to_string(),
                    discretization: method.discretization(),
                    status: sol.status.as_str().to_string(),
                    final_time: tf,
                    final_time_error: (tf - tf_exact).abs(),
                    max_error_x: max_err_x,
                    max_error_y: max_err_y,
                    endpoint_error,
                    iterations: sol.iterations,
                    solve_ms: sol.solve_time_ms,
                },
                Some(traj),
            ))
        })();
        match cell {
            Ok((cell, traj)) => {
                if let Some(t) = traj {
                    last_in_family = Some((family, t));
                }
                cells.push(cell);
            }
            Err(message) => cells.push(SweepCell {
                method: family.to_string(),
                discretization: method.discretization(),
                status: format!("failed: {message}"),
                final_time: f64::NAN,
                final_time_error: f64::NAN,
                max_error_x: f64::NAN,
                max_error_y: f64::NAN,
                endpoint_error: f64::NAN,
                iterations: 0,
                solve_ms: f64::NAN,
            }),
        }
    }

    BrachSweepReport {
        analytic_final_time: tf_exact,
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_covers_every_cell_once() {
        let methods = vec![
            SweepMethod::Pseudospectral { order: 5 },
            SweepMethod::Pseudospectral { order: 10 },
            SweepMethod::Euler { intervals: 10 },
        ];
        let report = run_brachistochrone_sweep(
            &BrachParams::default(),
            &methods,
            &SolverOptions {
                max_iterations: 300,
                ..Default::default()
            },
        );
        assert_eq!(report.cells.len(), 3);
        assert!(report.cell("pseudospectral", "N=5").is_some());
        assert!(report.cell("pseudospectral", "N=10").is_some());
        assert!(report.cell("euler", "N=10").is_some());
        // Continuation from N=5 keeps N=10 convergent and accurate.
        let c10 = report.cell("pseudospectral", "N=10").unwrap();
        assert_eq!(c10.status, "optimal");
        assert!(c10.final_time_error < 1e-4, "{}", c10.final_time_error);
    }
}
