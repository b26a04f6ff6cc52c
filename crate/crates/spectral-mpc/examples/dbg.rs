use spectral_mpc::experiments::flight::*;
use spectral_mpc::experiments::reference::FlightProfile;
use spectral_mpc::models::aircraft::{self, AircraftParams};
use spectral_mpc::mpc::run_closed_loop;

fn main() {
    let params = AircraftParams::default();
    let trim = aircraft::trim(&params, 50.0, 200.0).unwrap();
    println!("trim: pitch {:.3} deg, elevator {:.3} deg, throttle {:.4}",
        trim.pitch_rad.to_degrees(), trim.elevator_deg, trim.throttle);
    let tmax = aircraft::max_thrust(200.0, 50.0, &params);
    println!("max thrust at (200 m, 50 m/s): {:.1} N -> trim fraction {:.3}", tmax, trim.throttle);

    let mut profile = FlightProfile::default();
    profile.waypoints = vec![(0.0, 200.0), (6.0, 200.0), (10.0, 209.0)];
    let problem = flight_mpc_problem(&params);
    let config = flight_mpc_config();
    let scenario = flight_scenario(1, &profile, &params).unwrap();
    let t0 = std::time::Instant::now();
    let log = run_closed_loop(&config, &problem, &scenario).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    println!("10 s scenario: {} samples in {:.2} s ({:.1} ms/step)", log.records.len(), elapsed, 1000.0*elapsed/log.records.len() as f64);
    for r in log.records.iter().step_by(20) {
        println!("t {:5.1} h {:7.3} Vt {:6.3} th {:6.3} de {:6.3} dth {:.4} dde {:7.2} status {:?}{} it {}",
            r.t, r.plant_state[0], aircraft::true_airspeed(&r.plant_state),
            r.plant_state[3].to_degrees(), r.plant_state[5], r.applied_control[0], r.applied_control[1],
            r.status, if r.degraded {"-DEG"} else {""}, r.iterations);
    }
    let last = log.records.last().unwrap();
    println!("final: h {:.3} Vt {:.4} completed {}", last.plant_state[0], aircraft::true_airspeed(&last.plant_state), log.completed);
}
