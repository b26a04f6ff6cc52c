//! Scenario definitions, reference generators, fault injection with
//! FDI-driven constraint updates, and the sweep harnesses.

pub mod brach_sweep;
pub mod faults;
pub mod flight;
pub mod reference;
pub mod report;
pub mod robot_study;
pub mod scenario;

pub use brach_sweep::{run_brachistochrone_sweep, BrachSweepReport, SweepMethod};
pub use faults::{
    apply_fault, fdi_messages_for, update_constraints_from_fdi, FaultEvent, FaultScript,
    FdiMessage,
};
pub use flight::{run_flight_scenarios, FlightReport, FlightSummaryRow};
pub use reference::{CircleReference, FlightProfile, LineReference};
pub use robot_study::{run_robot_study, RobotStudy, RobotStudyReport};
pub use scenario::ScenarioConfig;
