//! Stuck-actuator fault injection and FDI-driven constraint reconfiguration.
//!
//! Faults act plant-side: from the onset time the actuator's effective value
//! is the stuck value regardless of command. Detection messages reconfigure
//! the controller by collapsing the faulty actuator's box bounds to the stuck
//! value, so one controller serves both nominal and fault cases.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEvent {
    /// Time the actuator freezes, s.
    pub onset: f64,
    /// Control-vector index of the actuator.
    pub actuator: usize,
    /// Value the actuator is stuck at.
    pub stuck_value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaultScript {
    pub events: Vec<FaultEvent>,
}

impl FaultScript {
    pub fn stuck_at(onset: f64, actuator: usize, stuck_value: f64) -> Self {
        Self {
            events: vec![FaultEvent {
                onset,
                actuator,
                stuck_value,
            }],
        }
    }

    /// Onset times must be nonnegative and stuck values inside the actuator's
    /// physical range.
    pub fn validate(&self, lower: &[f64], upper: &[f64]) -> Result<(), String> {
        for e in &self.events {
            if e.onset < 0.0 {
                return Err(format!("fault onset {} is negative", e.onset));
            }
            if e.actuator >= lower.len() {
                return Err(format!("actuator {} out of range", e.actuator));
            }
            if e.stuck_value < lower[e.actuator] || e.stuck_value > upper[e.actuator] {
                return Err(format!(
                    "stuck value {} outside actuator {} range [{}, {}]",
                    e.stuck_value, e.actuator, lower[e.actuator], upper[e.actuator]
                ));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Effective controls after fault interception at time `t`: active events
/// force their actuator to the stuck value, others pass through.
pub fn apply_fault(script: &FaultScript, t: f64, commanded: &[f64]) -> Vec<f64> {
    let mut effective = commanded.to_vec();
    for e in &script.events {
        if t >= e.onset && e.actuator < effective.len() {
            effective[e.actuator] = e.stuck_value;
        }
    }
    effective
}

/// What the (assumed-available) fault detection reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdiMessage {
    /// When the controller learns about the fault, s (≥ onset; equal for the
    /// default perfect FDI).
    pub detection_time: f64,
    pub actuator: usize,
    pub stuck_value: f64,
}

/// Perfect-FDI messages for a script; `latency` delays detection.
pub fn fdi_messages_for(script: &FaultScript, latency: f64) -> Vec<FdiMessage> {
    script
        .events
        .iter()
        .map(|e| FdiMessage {
            detection_time: e.onset + latency,
            actuator: e.actuator,
            stuck_value: e.stuck_value,
        })
        .collect()
}

/// Collapse the faulty actuator's controller-side box bounds to the stuck
/// value; all other bounds are untouched.
pub fn update_constraints_from_fdi(
    msg: &FdiMessage,
    lower: &[f64],
    upper: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut lo = lower.to_vec();
    let mut hi = upper.to_vec();
    if msg.actuator < lo.len() {
        lo[msg.actuator] = msg.stuck_value;
        hi[msg.actuator] = msg.stuck_value;
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_script_passes_through() {
        let script = FaultScript::default();
        let u = apply_fault(&script, 12.0, &[0.9, -3.0]);
        assert_eq!(u, vec![0.9, -3.0]);
    }

    #[test]
    fn stuck_throttle_at_eighty_seconds() {
        let script = FaultScript::stuck_at(80.0, 0, 0.20);
        assert_eq!(apply_fault(&script, 79.9, &[0.9, 1.0]), vec![0.9, 1.0]);
        assert_eq!(apply_fault(&script, 80.0, &[0.9, 1.0]), vec![0.20, 1.0]);
        assert_eq!(apply_fault(&script, 150.0, &[0.5, -2.0]), vec![0.20, -2.0]);
    }

    #[test]
    fn stuck_value_overrides_command_elevator_unaffected() {
        let script = FaultScript::stuck_at(0.0, 0, 0.35);
        let u = apply_fault(&script, 5.0, &[0.9, -14.0]);
        assert_eq!(u, vec![0.35, -14.0]);
    }

    #[test]
    fn fault_masking_is_idempotent() {
        let script = FaultScript::stuck_at(1.0, 1, 2.5);
        for t in [0.0, 1.0, 7.5] {
            let once = apply_fault(&script, t, &[0.1, 0.2, 0.3]);
            let twice = apply_fault(&script, t, &once);
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn fdi_collapses_only_the_faulty_actuator() {
        let msg = FdiMessage {
            detection_time: 80.0,
            actuator: 0,
            stuck_value: 0.35,
        };
        let (lo, hi) = update_constraints_from_fdi(&msg, &[0.0, -200.0], &[1.0, 200.0]);
        assert_eq!(lo, vec![0.35, -200.0]);
        assert_eq!(hi, vec![0.35, 200.0]);
    }

    #[test]
    fn perfect_fdi_matches_onsets() {
        let script = FaultScript::stuck_at(80.0, 0, 0.2);
        let msgs = fdi_messages_for(&script, 0.0);
        assert_eq!(msgs.len(), 1);
        assert_eq!(msgs[0].detection_time, 80.0);
        let delayed = fdi_messages_for(&script, 0.5);
        assert_eq!(delayed[0].detection_time, 80.5);
    }

    #[test]
    fn validation_rejects_out_of_range_values() {
        let script = FaultScript::stuck_at(10.0, 0, 1.5);
        assert!(script.validate(&[0.0, -200.0], &[1.0, 200.0]).is_err());
        let script = FaultScript::stuck_at(-1.0, 0, 0.5);
        assert!(script.validate(&[0.0], &[1.0]).is_err());
        let ok = FaultScript::stuck_at(10.0, 0, 0.5);
        assert!(ok.validate(&[0.0], &[1.0]).is_ok());
    }
}
