//! Experiment runner for the constrained options planner: TOML configs,
//! seeded campaigns, CSV and JSON-lines output.

pub mod config;
pub mod experiment;
pub mod output;
pub mod report;

pub use config::{ArmConfig, DomainKind, ExperimentConfig};
pub use experiment::{run_anytime, run_arm, run_branching, run_experiment, ArmResult, SweepPoint};
