//! Longitudinal fixed-wing aircraft model.
//!
//! Plant state `[h, V_N, V_D, θ, q, δ_e, x_N]` with altitude h positive up,
//! NED velocities (V_D positive down), pitch θ, pitch rate q, elevator
//! deflection δ_e in degrees driven by the rate command Δδ_e, and north
//! position x_N kept for logging only. The controller works on the first six
//! states. Controls are `[δ_th, Δδ_e]`: throttle fraction and elevator rate
//! in deg/s.
//!
//! Force and moment coefficients use polynomial fits valid for angle of
//! attack α ≤ 15 deg; angles inside the polynomials are in degrees, with the
//! pitch rate entering through the 180·q·c̄/(π·2·V_t) term.

use serde::{Deserialize, Serialize};

use super::ModelError;

/// State vector indices (6-state controller view; the plant appends x_N).
pub const IDX_ALTITUDE: usize = 0;
pub const IDX_VN: usize = 1;
pub const IDX_VD: usize = 2;
pub const IDX_THETA: usize = 3;
pub const IDX_Q: usize = 4;
pub const IDX_ELEVATOR: usize = 5;
pub const IDX_NORTH: usize = 6;

pub const STATE_DIM: usize = 6;
pub const PLANT_DIM: usize = 7;
pub const CONTROL_DIM: usize = 2;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AircraftParams {
    /// Wing reference area S, m².
    pub wing_area: f64,
    /// Mean aerodynamic chord c̄, m.
    pub chord: f64,
    /// Mass, kg.
    pub mass: f64,
    /// Pitch-axis inertia I_Y, kg·m².
    pub inertia_pitch: f64,
    /// Roll-axis inertia I_X, kg·m² (stored, unused longitudinally).
    pub inertia_roll: f64,
    /// Yaw-axis inertia I_Z, kg·m² (stored, unused longitudinally).
    pub inertia_yaw: f64,
    /// Cross product of inertia I_XZ, kg·m² (stored, unused longitudinally).
    pub inertia_xz: f64,
    /// Longitudinal c.g. position x_cg.
    pub cg_position: f64,
    /// Reference c.g. position x_cg,ref.
    pub cg_reference: f64,
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
    /// Normal-force slope |∂CZ/∂α| per degree (substitute model).
    pub cz_alpha_per_deg: f64,
    /// Normal-force elevator effectiveness |∂CZ/∂δ_e| per degree.
    pub cz_elevator_per_deg: f64,
}

impl Default for AircraftParams {
    fn default() -> Self {
        Self {
            wing_area: 20.0,
            chord: 3.0,
            mass: 1177.0,
            inertia_pitch: 11044.0,
            inertia_roll: 2257.0,
            inertia_yaw: 12636.0,
            inertia_xz: 106.0,
            cg_position: 0.0,
            cg_reference: 0.0,
            gravity: 9.81,
            cz_alpha_per_deg: 0.18,
            cz_elevator_per_deg: 0.0072,
        }
    }
}

/// International Standard Atmosphere troposphere: density and speed of sound
/// at geometric altitude `h` in meters.
pub fn atmosphere(h: f64) -> Result<(f64, f64), ModelError> {
    if !(0.0..=11000.0).contains(&h) {
        return Err(ModelError::OutOfEnvelope { altitude: h });
    }
    Ok(atmosphere_clamped(h))
}

/// Atmosphere evaluated with altitude clamped into the troposphere; keeps
/// plant integration defined if a faulted run sinks through zero altitude.
pub fn atmosphere_clamped(h: f64) -> (f64, f64) {
    let h = h.clamp(0.0, 11000.0);
    let temp = 288.15 - 0.0065 * h;
    let rho = 1.225 * (temp / 288.15).powf(4.2561);
    let speed_of_sound = (1.4 * 287.053 * temp).sqrt();
    (rho, speed_of_sound)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroCoefficients {
    pub cx: f64,
    pub cz: f64,
    pub cm: f64,
    /// Set when α exceeds the 15 deg validity limit of the fits.
    pub alpha_exceeds_validity: bool,
}

/// Body-axis force and pitching-moment coefficients.
///
/// `alpha`, `beta`, `elevator`, `aileron` in degrees; `pitch_rate` in rad/s.
pub fn aero_coefficients(
    alpha: f64,
    beta: f64,
    elevator: f64,
    aileron: f64,
    pitch_rate: f64,
    v_t: f64,
    params: &AircraftParams,
) -> AeroCoefficients {
    let beta2 = beta * beta;
    let rate = 180.0 * pitch_rate * params.chord / (std::f64::consts::PI * 2.0 * v_t.max(0.1));
    let cx = -0.0434 + 2.93e-3 * alpha + 2.53e-5 * beta2 - 1.07e-6 * alpha * beta2
        + 9.5e-4 * elevator
        - 8.5e-7 * elevator * beta2
        + rate * (8.73e-3 + 0.001 * alpha - 1.75e-4 * alpha * alpha);
    let cz = -(params.cz_alpha_per_deg * alpha + params.cz_elevator_per_deg * elevator);
    let cm = -6.61e-3 - 2.67e-3 * alpha - 6.48e-5 * beta2 - 2.65e-6 * alpha * beta2
        - 6.54e-3 * elevator
        - 8.49e-5 * elevator * alpha
        + 3.74e-6 * elevator * beta2
        - 3.5e-5 * aileron * aileron
        + rate * (-0.0473 - 1.57e-3 * alpha)
        + (params.cg_reference - params.cg_position) * cz;
    AeroCoefficients {
        cx,
        cz,
        cm,
        alpha_exceeds_validity: alpha > 15.0,
    }
}

/// Maximum thrust at altitude `h` (m) and true airspeed `v_t` (m/s): a
/// bivariate polynomial in h/3048 and Mach scaled by 4448.22/20 N.
pub fn max_thrust(h: f64, v_t: f64, _params: &AircraftParams) -> f64 {
    let h_t = h.clamp(0.0, 11000.0) / 3048.0;
    let (_, v_s) = atmosphere_clamped(h);
    let mach = v_t.max(0.0) / v_s;
    let p0 = 30.21 + h_t * (-0.668 + h_t * (-6.877 + h_t * (1.951 + h_t * (-0.1512))));
    let p1 = -33.8 + h_t * (3.347 + h_t * (18.13 + h_t * (-5.865 + h_t * 0.4757)));
    let p2 = 100.8 + h_t * (-77.56 + h_t * (5.441 + h_t * (2.864 + h_t * (-0.3355))));
    let p3 = -78.99 + h_t * (101.4 + h_t * (-30.28 + h_t * (3.236 + h_t * (-0.1089))));
    let p4 = 18.74 + h_t * (-31.6 + h_t * (12.04 + h_t * (-1.785 + h_t * 0.09417)));
    let t_norm = p0 + mach * (p1 + mach * (p2 + mach * (p3 + mach * p4)));
    t_norm * 4448.22 / 20.0
}

/// Thrust T = T_max · δ_th with the throttle clamped into [0, 1]; the flag
/// reports whether clamping occurred.
pub fn thrust(h: f64, v_t: f64, throttle: f64, params: &AircraftParams) -> (f64, bool) {
    let clamped = !(0.0..=1.0).contains(&throttle);
    let th = throttle.clamp(0.0, 1.0);
    (max_thrust(h, v_t, params) * th, clamped)
}

/// Angle of attack in degrees from the 6/7-state vector.
pub fn alpha_deg(state: &[f64]) -> f64 {
    let theta = state[IDX_THETA];
    let u = state[IDX_VN] * theta.cos() - state[IDX_VD] * theta.sin();
    let w = state[IDX_VN] * theta.sin() + state[IDX_VD] * theta.cos();
    w.atan2(u).to_degrees()
}

/// True airspeed from the state vector.
pub fn true_airspeed(state: &[f64]) -> f64 {
    (state[IDX_VN] * state[IDX_VN] + state[IDX_VD] * state[IDX_VD]).sqrt()
}

/// Six-state controller dynamics: `[ḣ, V̇_N, V̇_D, θ̇, q̇, δ̇_e]`.
pub fn dynamics6(state: &[f64], control: &[f64], params: &AircraftParams) -> [f64; 6] {
    let h = state[IDX_ALTITUDE];
    let v_n = state[IDX_VN];
    let v_d = state[IDX_VD];
    let theta = state[IDX_THETA];
    let q = state[IDX_Q];
    let elevator = state[IDX_ELEVATOR];
    let throttle = control[0];
    let elevator_rate = control[1];

    let v_t = (v_n * v_n + v_d * v_d).sqrt();
    let (sin_t, cos_t) = theta.sin_cos();
    let u = v_n * cos_t - v_d * sin_t;
    let w = v_n * sin_t + v_d * cos_t;
    let alpha = w.atan2(u).to_degrees();
    let (rho, _) = atmosphere_clamped(h);
    let q_bar = 0.5 * rho * v_t * v_t;
    let coeffs = aero_coefficients(alpha, 0.0, elevator, 0.0, q, v_t, params);
    let (t_force, _) = thrust(h, v_t, throttle, params);
    let a_x = (q_bar * params.wing_area * coeffs.cx + t_force) / params.mass;
    let a_z = q_bar * params.wing_area * coeffs.cz / params.mass;
    let a_n = a_x * cos_t + a_z * sin_t;
    let a_d = params.gravity - a_x * sin_t + a_z * cos_t;
    let q_dot = q_bar * params.wing_area * params.chord * coeffs.cm / params.inertia_pitch;

    [-v_d, a_n, a_d, q, q_dot, elevator_rate]
}

/// Full plant dynamics with the north-position log state appended.
pub fn dynamics7(state: &[f64], control: &[f64], params: &AircraftParams) -> [f64; 7] {
    let d6 = dynamics6(state, control, params);
    [
        d6[0], d6[1], d6[2], d6[3], d6[4], d6[5], state[IDX_VN],
    ]
}

/// Straight-and-level trim condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimState {
    pub pitch_rad: f64,
    pub elevator_deg: f64,
    pub throttle: f64,
}

impl TrimState {
    /// Full plant state at this trim for the given altitude and airspeed.
    pub fn plant_state(&self, h: f64, v_t: f64) -> [f64; 7] {
        [h, v_t, 0.0, self.pitch_rad, 0.0, self.elevator_deg, 0.0]
    }
}

/// Solve straight-and-level trim (V_D = 0, q = 0) at the given airspeed and
/// altitude by Newton iteration on (V̇_N, V̇_D, q̇) over (θ, δ_e, δ_th).
pub fn trim(params: &AircraftParams, v_t: f64, h: f64) -> Result<TrimState, ModelError> {
    let residual = |vars: &[f64; 3]| -> [f64; 3] {
        let state = [h, v_t, 0.0, vars[0], 0.0, vars[1]];
        let control = [vars[2], 0.0];
        let d = dynamics6(&state, &control, params);
        [d[IDX_VN], d[IDX_VD], d[IDX_Q]]
    };
    let mut vars = [0.05, -1.0, 0.4];
    for _ in 0..60 {
        let r = residual(&vars);
        let norm = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if norm < 1e-11 {
            return Ok(TrimState {
                pitch_rad: vars[0],
                elevator_deg: vars[1],
                throttle: vars[2],
            });
        }
        // Finite-difference Jacobian of the 3x3 system.
        let mut jac = [[0.0; 3]; 3];
        for c in 0..3 {
            let step = 1e-7 * (1.0 + vars[c].abs());
            let mut vp = vars;
            vp[c] += step;
            let rp = residual(&vp);
            vp[c] = vars[c] - step;
            let rm = residual(&vp);
            for (row, jrow) in jac.iter_mut().enumerate() {
                jrow[c] = (rp[row] - rm[row]) / (2.0 * step);
            }
        }
        let m = nalgebra::Matrix3::from_fn(|i, j| jac[i][j]);
        let rhs = nalgebra::Vector3::new(-r[0], -r[1], -r[2]);
        let delta = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| ModelError::TrimFailed("singular Jacobian".into()))?;
        for i in 0..3 {
            vars[i] += delta[i];
        }
    }
    Err(ModelError::TrimFailed(format!(
        "no convergence at V_t = {v_t}, h = {h}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn aero_leading_constants() {
        let p = AircraftParams::default();
        let c = aero_coefficients(0.0, 0.0, 0.0, 0.0, 0.0, 50.0, &p);
        assert_relative_eq!(c.cx, -0.0434, epsilon = 1e-12);
        assert_relative_eq!(c.cm, -6.61e-3, epsilon = 1e-12);
        assert!(!c.alpha_exceeds_validity);
    }

    #[test]
    fn aero_alpha_slope() {
        let p = AircraftParams::default();
        let c = aero_coefficients(10.0, 0.0, 0.0, 0.0, 0.0, 50.0, &p);
        assert_relative_eq!(c.cx, -0.0434 + 2.93e-2, epsilon = 1e-12);
    }

    #[test]
    fn aero_beta_and_aileron_terms_vanish_when_zero() {
        let p = AircraftParams::default();
        // With β = δ_a = 0 the remaining terms depend only on α, δ_e, q.
        let a = aero_coefficients(4.0, 0.0, -2.0, 0.0, 0.02, 60.0, &p);
        let manual_cx = -0.0434 + 2.93e-3 * 4.0 + 9.5e-4 * (-2.0)
            + (180.0 * 0.02 * 3.0 / (std::f64::consts::PI * 2.0 * 60.0))
                * (8.73e-3 + 0.001 * 4.0 - 1.75e-4 * 16.0);
        assert_relative_eq!(a.cx, manual_cx, epsilon = 1e-14);
        let manual_cm = -6.61e-3 - 2.67e-3 * 4.0 - 6.54e-3 * (-2.0) - 8.49e-5 * (-2.0) * 4.0
            + (180.0 * 0.02 * 3.0 / (std::f64::consts::PI * 2.0 * 60.0))
                * (-0.0473 - 1.57e-3 * 4.0);
        assert_relative_eq!(a.cm, manual_cm, epsilon = 1e-14);
    }

    #[test]
    fn alpha_validity_flag() {
        let p = AircraftParams::default();
        assert!(aero_coefficients(15.5, 0.0, 0.0, 0.0, 0.0, 50.0, &p).alpha_exceeds_validity);
    }

    #[test]
    fn thrust_zero_throttle_and_linearity() {
        let p = AircraftParams::default();
        assert_eq!(thrust(100.0, 50.0, 0.0, &p).0, 0.0);
        let full = thrust(500.0, 60.0, 1.0, &p).0;
        let half = thrust(500.0, 60.0, 0.5, &p).0;
        assert_relative_eq!(half, full / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn static_sea_level_thrust() {
        let p = AircraftParams::default();
        let t = max_thrust(0.0, 0.0, &p);
        assert_relative_eq!(t, 30.21 * 4448.22 / 20.0, epsilon = 1e-9);
        assert_relative_eq!(t, 6719.0, epsilon = 0.2);
    }

    #[test]
    fn thrust_clamps_out_of_range_throttle() {
        let p = AircraftParams::default();
        let (t, clamped) = thrust(0.0, 0.0, 1.7, &p);
        assert!(clamped);
        assert_relative_eq!(t, max_thrust(0.0, 0.0, &p), epsilon = 1e-12);
    }

    #[test]
    fn atmosphere_sea_level_and_monotone() {
        let (rho0, vs0) = atmosphere(0.0).unwrap();
        assert_relative_eq!(rho0, 1.225, epsilon = 1e-12);
        assert_relative_eq!(vs0, 340.3, epsilon = 0.1);
        let (rho300, _) = atmosphere(300.0).unwrap();
        assert_relative_eq!(rho300, 1.1901, epsilon = 1e-3);
        let mut prev = rho0;
        for h in (500..=11000).step_by(500) {
            let (rho, _) = atmosphere(h as f64).unwrap();
            assert!(rho < prev);
            prev = rho;
        }
        assert!(atmosphere(-10.0).is_err());
        assert!(atmosphere(20000.0).is_err());
    }

    #[test]
    fn free_fall_when_forces_vanish() {
        // Zero wing area and zero throttle: a_N = 0, a_D = g.
        let mut p = AircraftParams::default();
        p.wing_area = 0.0;
        let d = dynamics6(&[100.0, 50.0, 0.0, 0.0, 0.0, 0.0], &[0.0, 0.0], &p);
        assert_eq!(d[IDX_VN], 0.0);
        assert_relative_eq!(d[IDX_VD], p.gravity, epsilon = 1e-12);
    }

    #[test]
    fn elevator_holds_without_rate_command() {
        let p = AircraftParams::default();
        let d = dynamics6(&[100.0, 50.0, 0.0, 0.05, 0.0, -2.0], &[0.4, 0.0], &p);
        assert_eq!(d[IDX_ELEVATOR], 0.0);
    }

    #[test]
    fn wings_level_identity() {
        let state = [100.0, 50.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(true_airspeed(&state), 50.0);
        assert_eq!(alpha_deg(&state), 0.0);
    }

    #[test]
    fn energy_conserved_without_aero_and_thrust() {
        let mut p = AircraftParams::default();
        p.wing_area = 0.0;
        let f = |_t: f64, x: &[f64], dx: &mut [f64]| {
            let d = dynamics7(x, &[0.0, 0.0], &p);
            dx.copy_from_slice(&d);
        };
        let x0 = [1000.0, 40.0, -5.0, 0.1, 0.0, 0.0, 0.0];
        let x1 = crate::integrate::rk45_integrate(&f, 0.0, &x0, 5.0, 1e-10, 1e-10).unwrap();
        let energy = |x: &[f64]| p.gravity * x[IDX_ALTITUDE] + 0.5 * true_airspeed(x).powi(2);
        assert_relative_eq!(energy(&x0), energy(&x1), epsilon = 1e-5);
    }

    #[test]
    fn trim_is_reasonable_and_balances() {
        let p = AircraftParams::default();
        let trim = trim(&p, 50.0, 100.0).unwrap();
        assert!(trim.throttle > 0.2 && trim.throttle < 0.5, "{trim:?}");
        assert!(trim.pitch_rad.to_degrees() < 15.0);
        let state = trim.plant_state(100.0, 50.0);
        let d = dynamics7(&state, &[trim.throttle, 0.0], &p);
        for v in &d[1..5] {
            assert!(v.abs() < 1e-9, "residual {v}");
        }
        // Level flight: altitude rate is zero because V_D = 0.
        assert_eq!(d[0], 0.0);
    }

    #[test]
    fn north_position_integrates_vn() {
        let p = AircraftParams::default();
        let d = dynamics7(&[100.0, 50.0, 0.0, 0.0, 0.0, 0.0, 3.0], &[0.3, 0.0], &p);
        assert_eq!(d[IDX_NORTH], 50.0);
    }
}
