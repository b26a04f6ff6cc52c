//! Solve the Brachistochrone by all four transcriptions and compare against
//! the analytic cycloid.
//!
//! ```bash
//! cargo run --example solve_brachistochrone
//! ```

use spectral_mpc::models::brachistochrone::{self, BrachParams};
use spectral_mpc::sqp::{self, SolverOptions};
use spectral_mpc::transcription::{
    default_initial_guess, recover_trajectory, transcribe_euler, transcribe_multiple_shooting,
    transcribe_pseudospectral, transcribe_single_shooting, NlpProblem, ShootingOptions,
};

fn solve_and_report(name: &str, nlp: &NlpProblem, params: &BrachParams) {
    let problem = brachistochrone::ocp(params);
    let z0 = default_initial_guess(&problem, &nlp.layout);
    let opts = SolverOptions {
        max_iterations: 400,
        ..Default::default()
    };
    let start = std::time::Instant::now();
    match sqp::solve(nlp, &z0, &opts) {
        Ok(sol) => {
            let traj = recover_trajectory(nlp, &sol.z).expect("recover");
            let tf = *traj.times.last().unwrap();
            let tf_exact =
                brachistochrone::analytic_final_time(params.target_x, params.gravity).unwrap();
            let mut max_err = 0.0f64;
            for (k, &t) in traj.times.iter().enumerate() {
                let (xa, ya) =
                    brachistochrone::analytic_position(t, params.target_x, params.gravity)
                        .unwrap();
                max_err = max_err.max((traj.states[(k, 0)] - xa).abs());
                max_err = max_err.max((traj.states[(k, 1)] - ya).abs());
            }
            println!(
                "{name:20} status={:12} iters={:4} tf={:.6} (exact {tf_exact:.6}) \
                 traj_err={max_err:.2e} time={:?}",
                sol.status.as_str(),
                sol.iterations,
                tf,
                start.elapsed()
            );
        }
        Err(e) => println!("{name:20} failed: {e}"),
    }
}

fn main() {
    let params = BrachParams::default();
    let problem = brachistochrone::ocp(&params);

    for n in [5, 10, 20, 50] {
        let nlp = transcribe_pseudospectral(&problem, n).expect("transcribe");
        solve_and_report(&format!("pseudospectral N={n}"), &nlp, &params);
    }
    for n in [20, 50] {
        let nlp = transcribe_euler(&problem, n).expect("transcribe");
        solve_and_report(&format!("euler N={n}"), &nlp, &params);
    }
    let nlp =
        transcribe_single_shooting(&problem, 5, 100, ShootingOptions::default()).expect("ss");
    solve_and_report("single shooting 5", &nlp, &params);
    let nlp = transcribe_multiple_shooting(&problem, 4, 4, 80, ShootingOptions::default())
        .expect("ms");
    solve_and_report("multiple shooting", &nlp, &params);
}
