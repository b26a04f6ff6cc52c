//! Planar differential-drive robot.
//!
//! State `[x, y, ψ]`; controls are the right and left wheel angular
//! velocities `[ω_R, ω_L]` in rad/s. Body speed is V = R(ω_R + ω_L)/2 and
//! heading rate ψ̇ = R(ω_R − ω_L)/(2b).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RobotParams {
    /// Wheel radius R, m.
    pub wheel_radius: f64,
    /// Half axle length b, m.
    pub half_axle: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            wheel_radius: 0.1,
            half_axle: 0.25,
        }
    }
}

/// Wheel-speed box constraint used throughout the studies: ±1000 deg/s.
pub const WHEEL_SPEED_LIMIT: f64 = 1000.0 * std::f64::consts::PI / 180.0;

/// Body speed V = R(ω_R + ω_L)/2.
pub fn speed(omega_right: f64, omega_left: f64, params: &RobotParams) -> f64 {
    params.wheel_radius * (omega_right + omega_left) / 2.0
}

/// Heading rate ψ̇ = R(ω_R − ω_L)/(2b).
pub fn heading_rate(omega_right: f64, omega_left: f64, params: &RobotParams) -> f64 {
    params.wheel_radius * (omega_right - omega_left) / (2.0 * params.half_axle)
}

/// Equations of motion: ẋ = V cosψ, ẏ = V sinψ, ψ̇ as above.
pub fn dynamics(state: &[f64], omega_right: f64, omega_left: f64, params: &RobotParams) -> [f64; 3] {
    let v = speed(omega_right, omega_left, params);
    let psi = state[2];
    [
        v * psi.cos(),
        v * psi.sin(),
        heading_rate(omega_right, omega_left, params),
    ]
}

/// Wheel speeds achieving a given body speed and heading rate.
pub fn wheel_speeds_for(v: f64, psi_dot: f64, params: &RobotParams) -> (f64, f64) {
    let sum = 2.0 * v / params.wheel_radius;
    let diff = 2.0 * params.half_axle * psi_dot / params.wheel_radius;
    (0.5 * (sum + diff), 0.5 * (sum - diff))
}
