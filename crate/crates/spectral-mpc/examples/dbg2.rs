use spectral_mpc::experiments::flight::*;
use spectral_mpc::experiments::reference::FlightProfile;
use spectral_mpc::models::aircraft::AircraftParams;
use spectral_mpc::mpc::run_closed_loop;

fn main() {
    let params = AircraftParams::default();
    let mut profile = FlightProfile::default();
    profile.waypoints = vec![(0.0, 200.0), (1.0, 200.0), (3.0, 204.0)];
    let problem = flight_mpc_problem(&params);
    let mut config = flight_mpc_config();
    config.solver.verbose = true;
    let scenario = flight_scenario(1, &profile, &params).unwrap();
    let log = run_closed_loop(&config, &problem, &scenario).unwrap();
    eprintln!("done {} records", log.records.len());
}
