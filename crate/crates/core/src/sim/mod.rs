//! Closed-loop rollouts of double-integrator bodies under nominal controllers
//! filtered by (C)HOCBF-QPs.
//!
//! The plant is `q̈ = u` in the robot's configuration coordinates (planar
//! position, planar pose, or spatial pose with world angular velocity).
//! Integration is classical RK4; the control is held over each step unless
//! [`Hold::PerStage`] is selected.

mod config;
mod equilibrium;
mod law;
mod log;
mod run;
pub mod scenarios;

pub use config::{
    Aggregation, EquilibriumThresholds, Hold, InfeasiblePolicy, InputBox, NominalController, Reference, Robot, ScenarioConfig, VelocityLimits, SCHEMA_VERSION,
};
pub use equilibrium::{detect_equilibrium, detect_spurious_equilibrium, EquilibriumCase, EquilibriumReport};
pub use law::{ControlLaw, LawOutput};
pub use log::{status_name, CsvTable, StepRecord, TrajectoryLog};
pub use run::{percentiles, run_scenario, step, Percentile, PlantState, RunSummary, StepOutcome};
