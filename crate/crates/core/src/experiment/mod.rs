//! Experiment orchestration: configuration, synthetic data, the
//! leakage-safe feature pipeline, the runner and report emission.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod run;
pub mod synthetic;

pub use config::{ConfigError, ExperimentConfig};
pub use report::{emit_reports, Manifest};
pub use run::{run_experiment, ReportBundle, RunError};
