//! Experiment runner for the psro-core solvers: JSON configs, seeded runs,
//! CSV traces, summaries and run comparison.

pub mod compare;
pub mod config;
pub mod error;
pub mod run;

pub use compare::{compare_runs, ComparisonReport};
pub use config::{ExperimentConfig, GameSpec};
pub use error::{HarnessError, Result};
pub use run::{run_experiment, Summary};
