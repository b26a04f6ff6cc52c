//! Tracking-cost construction for the receding-horizon controller.

use std::sync::Arc;

use crate::models::robot::{heading_rate, speed, RobotParams};
use crate::ocp::RunningCostFn;

use super::{MpcError, ReferenceGenerator};

/// Quadratic weight set. Robot studies default to
/// (q_x, q_u, q_omega, q_v, q_psi) = (10, 1, 1, 1, 1); the flight cost uses
/// q_x = 10 on altitude, q_v = 20 on airspeed and q_u = 1 on elevator rate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Weights {
    pub q_x: f64,
    pub q_u: f64,
    pub q_omega: f64,
    pub q_v: f64,
    pub q_psi: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            q_x: 10.0,
            q_u: 1.0,
            q_omega: 1.0,
            q_v: 1.0,
            q_psi: 1.0,
        }
    }
}

impl Weights {
    pub fn flight_default() -> Self {
        Self {
            q_x: 10.0,
            q_v: 20.0,
            q_u: 1.0,
            q_omega: 0.0,
            q_psi: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), MpcError> {
        for (name, v) in [
            ("q_x", self.q_x),
            ("q_u", self.q_u),
            ("q_omega", self.q_omega),
            ("q_v", self.q_v),
            ("q_psi", self.q_psi),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(MpcError::Config(format!("weight {name} must be nonnegative")));
            }
        }
        Ok(())
    }
}

/// Which tracking cost the windowed problem minimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostKind {
    /// Robot path-tracking cost families 1–5:
    /// 1 state error; 2 + control error; 3 + wheel-speed difference;
    /// 4 speed and heading-rate errors only; 5 state + speed + heading rate.
    Robot { cost_type: u8, params: RobotParams },
    /// Altitude and true-airspeed tracking with elevator-rate effort.
    Flight,
}

/// Build the Bolza integrand for the selected cost over a reference.
pub fn build_cost(
    kind: CostKind,
    weights: Weights,
    reference: Arc<dyn ReferenceGenerator>,
) -> Result<RunningCostFn, MpcError> {
    weights.validate()?;
    match kind {
        CostKind::Robot { cost_type, params } => {
            if !(1..=5).contains(&cost_type) {
                return Err(MpcError::Config(format!(
                    "unknown robot cost type {cost_type} (valid: 1..=5)"
                )));
            }
            let w = weights;
            Ok(Arc::new(move |x: &[f64], u: &[f64], t: f64| {
                let ur = reference.control_ref(t);
                // Path error: distance to the nominal path where the
                // reference exposes its geometry, otherwise distance to the
                // reference point. Heading enters through the rate terms,
                // not the path norm.
                let state_err = |w_q: f64| {
                    let d = reference.path_distance(&x[..2]).unwrap_or_else(|| {
                        let xr = reference.state_ref(t);
                        ((x[0] - xr[0]).powi(2) + (x[1] - xr[1]).powi(2)).sqrt()
                    });
                    w_q * d * d
                };
                // Rate-like quantities enter in body-velocity units (m/s):
                // wheel terms through R/2, the heading rate through the half
                // axle b. This keeps the cost dimensionally homogeneous so
                // the documented weights behave as intended.
                let wheel_scale = 0.5 * params.wheel_radius;
                let rate_terms = |w_v: f64, w_psi: f64| {
                    let v = speed(u[0], u[1], &params);
                    let v_ref = speed(ur[0], ur[1], &params);
                    let psi_dot = heading_rate(u[0], u[1], &params);
                    let psi_dot_ref = heading_rate(ur[0], ur[1], &params);
                    w_v * (v - v_ref).powi(2)
                        + w_psi * (params.half_axle * (psi_dot - psi_dot_ref)).powi(2)
                };
                match cost_type {
                    1 => state_err(w.q_x),
                    2 => {
                        state_err(w.q_x)
                            + w.q_u
                                * ((wheel_scale * (u[0] - ur[0])).powi(2)
                                    + (wheel_scale * (u[1] - ur[1])).powi(2))
                    }
                    3 => state_err(w.q_x) + w.q_omega * (wheel_scale * (u[0] - u[1])).powi(2),
                    4 => rate_terms(w.q_v, w.q_psi),
                    _ => state_err(w.q_x) + rate_terms(w.q_v, w.q_psi),
                }
            }))
        }
        CostKind::Flight => {
            let w = weights;
            // The tracking terms leave fast throttle oscillations nearly
            // cost-free (only the elevator rate carries an effort weight);
            // a small throttle-deviation term removes that degeneracy
            // without measurably changing the tracking optimum.
            const THROTTLE_REG: f64 = 1e-2;
            Ok(Arc::new(move |x: &[f64], u: &[f64], t: f64| {
                let xr = reference.state_ref(t);
                let ur = reference.control_ref(t);
                let v_t = (x[1] * x[1] + x[2] * x[2]).sqrt();
                let v_ref = (xr[1] * xr[1] + xr[2] * xr[2]).sqrt();
                w.q_x * (x[0] - xr[0]).powi(2)
                    + w.q_v * (v_t - v_ref).powi(2)
                    + w.q_u * u[1] * u[1]
                    + THROTTLE_REG * (u[0] - ur[0]).powi(2)
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct FixedRef {
        state: Vec<f64>,
        control: Vec<f64>,
    }

    impl ReferenceGenerator for FixedRef {
        fn state_ref(&self, _t: f64) -> Vec<f64> {
            self.state.clone()
        }
        fn control_ref(&self, _t: f64) -> Vec<f64> {
            self.control.clone()
        }
    }

    fn line_ref() -> Arc<dyn ReferenceGenerator> {
        Arc::new(FixedRef {
            state: vec![0.0, 5.0, 0.0],
            control: vec![10.0, 10.0],
        })
    }

    #[test]
    fn type1_zero_on_reference() {
        let cost = build_cost(
            CostKind::Robot {
                cost_type: 1,
                params: RobotParams::default(),
            },
            Weights::default(),
            line_ref(),
        )
        .unwrap();
        assert_eq!(cost(&[0.0, 5.0, 0.0], &[3.0, 7.0], 0.0), 0.0);
        assert!(cost(&[0.0, 6.0, 0.0], &[10.0, 10.0], 0.0) > 0.0);
    }

    #[test]
    fn type3_zero_on_path_with_equal_wheels() {
        let cost = build_cost(
            CostKind::Robot {
                cost_type: 3,
                params: RobotParams::default(),
            },
            Weights::default(),
            line_ref(),
        )
        .unwrap();
        assert_eq!(cost(&[0.0, 5.0, 0.0], &[4.0, 4.0], 0.0), 0.0);
        assert!(cost(&[0.0, 5.0, 0.0], &[4.0, 2.0], 0.0) > 0.0);
    }

    #[test]
    fn type4_ignores_position() {
        let cost = build_cost(
            CostKind::Robot {
                cost_type: 4,
                params: RobotParams::default(),
            },
            Weights::default(),
            line_ref(),
        )
        .unwrap();
        let on = cost(&[0.0, 5.0, 0.0], &[10.0, 10.0], 0.0);
        let off = cost(&[37.0, -12.0, 0.0], &[10.0, 10.0], 0.0);
        assert_eq!(on, off);
        assert_eq!(on, 0.0);
    }

    #[test]
    fn type5_penalizes_position_and_rates() {
        let cost = build_cost(
            CostKind::Robot {
                cost_type: 5,
                params: RobotParams::default(),
            },
            Weights::default(),
            line_ref(),
        )
        .unwrap();
        assert_eq!(cost(&[0.0, 5.0, 0.0], &[10.0, 10.0], 0.0), 0.0);
        assert!(cost(&[0.0, 5.5, 0.0], &[10.0, 10.0], 0.0) > 0.0);
        assert!(cost(&[0.0, 5.0, 0.0], &[11.0, 10.0], 0.0) > 0.0);
    }

    #[test]
    fn unknown_type_rejected() {
        let err = build_cost(
            CostKind::Robot {
                cost_type: 6,
                params: RobotParams::default(),
            },
            Weights::default(),
            line_ref(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn flight_cost_tracks_altitude_airspeed_and_effort() {
        struct FlightRef;
        impl ReferenceGenerator for FlightRef {
            fn state_ref(&self, _t: f64) -> Vec<f64> {
                vec![100.0, 50.0, 0.0, 0.0, 0.0, 0.0]
            }
            fn control_ref(&self, _t: f64) -> Vec<f64> {
                vec![0.35, 0.0]
            }
        }
        let cost = build_cost(CostKind::Flight, Weights::flight_default(), Arc::new(FlightRef))
            .unwrap();
        let on = cost(&[100.0, 50.0, 0.0, 0.02, 0.0, -2.0], &[0.35, 0.0], 0.0);
        assert_eq!(on, 0.0);
        let high = cost(&[110.0, 50.0, 0.0, 0.02, 0.0, -2.0], &[0.35, 0.0], 0.0);
        assert!((high - 10.0 * 100.0).abs() < 1e-9);
        let effort = cost(&[100.0, 50.0, 0.0, 0.02, 0.0, -2.0], &[0.35, 3.0], 0.0);
        assert!((effort - 9.0).abs() < 1e-12);
    }
}
