//! Reference generators: straight line and circle for the robot, piecewise
//! altitude profile for the aircraft.

use serde::{Deserialize, Serialize};

use crate::models::aircraft::{self, AircraftParams};
use crate::models::robot::{wheel_speeds_for, RobotParams};
use crate::mpc::ReferenceGenerator;

/// Robot line following: `y = y_target` for all x ≥ 0 at constant speed.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LineReference {
    pub y_target: f64,
    pub speed: f64,
    pub x_start: f64,
    pub robot: RobotParams,
}

impl Default for LineReference {
    fn default() -> Self {
        Self {
            y_target: 5.0,
            speed: 1.0,
            x_start: 0.0,
            robot: RobotParams::default(),
        }
    }
}

impl ReferenceGenerator for LineReference {
    fn state_ref(&self, t: f64) -> Vec<f64> {
        vec![self.x_start + self.speed * t, self.y_target, 0.0]
    }

    fn control_ref(&self, _t: f64) -> Vec<f64> {
        let (wr, wl) = wheel_speeds_for(self.speed, 0.0, &self.robot);
        vec![wr, wl]
    }

    fn path_distance(&self, position: &[f64]) -> Option<f64> {
        Some(position[1] - self.y_target)
    }
}

/// Robot circular path at constant tangential speed. The heading reference is
/// continuous (unwrapped), counterclockwise when `ccw`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CircleReference {
    pub center: [f64; 2],
    pub radius: f64,
    pub speed: f64,
    /// Angular position on the circle at t = 0, rad.
    pub phase: f64,
    pub ccw: bool,
    pub robot: RobotParams,
}

impl Default for CircleReference {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0],
            radius: 5.0,
            speed: 1.0,
            phase: 0.0,
            ccw: true,
            robot: RobotParams::default(),
        }
    }
}

impl CircleReference {
    fn angular_rate(&self) -> f64 {
        let dir = if self.ccw { 1.0 } else { -1.0 };
        dir * self.speed / self.radius
    }
}

impl ReferenceGenerator for CircleReference {
    fn state_ref(&self, t: f64) -> Vec<f64> {
        let dir = if self.ccw { 1.0 } else { -1.0 };
        let angle = self.phase + self.angular_rate() * t;
        vec![
            self.center[0] + self.radius * angle.cos(),
            self.center[1] + self.radius * angle.sin(),
            angle + dir * std::f64::consts::FRAC_PI_2,
        ]
    }

    fn control_ref(&self, _t: f64) -> Vec<f64> {
        let (wr, wl) = wheel_speeds_for(self.speed, self.angular_rate(), &self.robot);
        vec![wr, wl]
    }

    fn path_distance(&self, position: &[f64]) -> Option<f64> {
        let dx = position[0] - self.center[0];
        let dy = position[1] - self.center[1];
        Some((dx * dx + dy * dy).sqrt() - self.radius)
    }
}

/// Aircraft altitude profile: piecewise-linear waypoints `(t, altitude)` at a
/// constant demanded true airspeed. Queries beyond the final waypoint clamp
/// to the last segment.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FlightProfile {
    /// (time s, altitude m), strictly increasing in time.
    pub waypoints: Vec<(f64, f64)>,
    pub airspeed: f64,
    /// Feed-forward trim (pitch rad, elevator deg, throttle), typically from
    /// [`aircraft::trim`] at the starting altitude.
    pub trim_pitch: f64,
    pub trim_elevator: f64,
    pub trim_throttle: f64,
}

impl Default for FlightProfile {
    fn default() -> Self {
        let params = AircraftParams::default();
        let trim = aircraft::trim(&params, 50.0, 200.0).expect("default trim");
        Self {
            waypoints: vec![
                (0.0, 200.0),
                (60.0, 200.0),
                (100.0, 290.0),
                (140.0, 290.0),
                (180.0, 200.0),
                (200.0, 200.0),
            ],
            airspeed: 50.0,
            trim_pitch: trim.pitch_rad,
            trim_elevator: trim.elevator_deg,
            trim_throttle: trim.throttle,
        }
    }
}

impl FlightProfile {
    pub fn duration(&self) -> f64 {
        self.waypoints.last().map(|w| w.0).unwrap_or(0.0)
    }

    /// Altitude and climb rate at `t` (clamped to the profile ends).
    pub fn altitude_and_rate(&self, t: f64) -> (f64, f64) {
        let w = &self.waypoints;
        if w.is_empty() {
            return (0.0, 0.0);
        }
        if t <= w[0].0 {
            return (w[0].1, 0.0);
        }
        if t >= w[w.len() - 1].0 {
            return (w[w.len() - 1].1, 0.0);
        }
        let k = w.partition_point(|p| p.0 <= t) - 1;
        let (t0, h0) = w[k];
        let (t1, h1) = w[k + 1];
        let slope = (h1 - h0) / (t1 - t0);
        (h0 + slope * (t - t0), slope)
    }

    /// The time span of the climb segment (first strictly increasing leg).
    pub fn climb_segment(&self) -> Option<(f64, f64)> {
        self.waypoints
            .windows(2)
            .find(|w| w[1].1 > w[0].1)
            .map(|w| (w[0].0, w[1].0))
    }
}

impl ReferenceGenerator for FlightProfile {
    fn state_ref(&self, t: f64) -> Vec<f64> {
        let (h, climb) = self.altitude_and_rate(t);
        // NED: climbing is negative down-velocity; keep |V_t| at the demanded
        // airspeed.
        let v_d = -climb;
        let v_n = (self.airspeed * self.airspeed - v_d * v_d).max(0.0).sqrt();
        vec![h, v_n, v_d, self.trim_pitch, 0.0, self.trim_elevator]
    }

    fn control_ref(&self, _t: f64) -> Vec<f64> {
        vec![self.trim_throttle, 0.0]
    }

    fn clamped(&self, t: f64) -> bool {
        t > self.duration()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn line_reference_values() {
        let r = LineReference::default();
        assert_eq!(r.state_ref(3.0), vec![3.0, 5.0, 0.0]);
        let u = r.control_ref(0.0);
        assert_relative_eq!(u[0], 10.0, epsilon = 1e-12);
        assert_relative_eq!(u[1], 10.0, epsilon = 1e-12);
    }

    #[test]
    fn circle_starts_tangent() {
        let r = CircleReference::default();
        let s = r.state_ref(0.0);
        assert_relative_eq!(s[0], 5.0, epsilon = 1e-12);
        assert_relative_eq!(s[1], 0.0, epsilon = 1e-12);
        // Tangent heading at (5, 0), counterclockwise.
        assert_relative_eq!(s[2], std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        let u = r.control_ref(0.0);
        assert_relative_eq!(u[0], 10.5, epsilon = 1e-12);
        assert_relative_eq!(u[1], 9.5, epsilon = 1e-12);
    }

    #[test]
    fn circle_period_closes() {
        let r = CircleReference::default();
        let period = 2.0 * std::f64::consts::PI * r.radius / r.speed;
        let s0 = r.state_ref(0.0);
        let s1 = r.state_ref(period);
        assert_relative_eq!(s0[0], s1[0], epsilon = 1e-9);
        assert_relative_eq!(s0[1], s1[1], epsilon = 1e-9);
    }

    #[test]
    fn flight_profile_segments_and_clamping() {
        let p = FlightProfile::default();
        assert_eq!(p.duration(), 200.0);
        let (h, rate) = p.altitude_and_rate(30.0);
        assert_eq!((h, rate), (200.0, 0.0));
        let (h, rate) = p.altitude_and_rate(80.0);
        assert_relative_eq!(h, 245.0, epsilon = 1e-12);
        assert_relative_eq!(rate, 2.25, epsilon = 1e-12);
        // Climb rate respects the ±3 m/s vertical speed box.
        for i in 0..=400 {
            let (_, rate) = p.altitude_and_rate(i as f64 * 0.5);
            assert!(rate.abs() < 3.0);
        }
        assert!(!p.clamped(120.0));
        assert!(p.clamped(201.0));
        let (h, _) = p.altitude_and_rate(500.0);
        assert_eq!(h, 200.0);
        assert_eq!(p.climb_segment(), Some((60.0, 100.0)));
    }

    #[test]
    fn flight_reference_airspeed_constant() {
        let p = FlightProfile::default();
        for t in [0.0, 70.0, 120.0, 150.0, 199.0] {
            let s = p.state_ref(t);
            let vt = (s[1] * s[1] + s[2] * s[2]).sqrt();
            assert_relative_eq!(vt, 50.0, epsilon = 1e-9);
        }
    }
}
