//! Experiment harness around `atb-core`: configuration, seeded trial
//! execution, confidence-interval aggregation, CSV and SVG export, and the
//! verification report.

pub mod aggregate;
pub mod config;
pub mod csv_out;
pub mod runner;
pub mod svg;
pub mod verify;

pub use aggregate::{aggregate, AggregateCurve, StrategyCurve};
pub use config::{parse_config, ConfigError, EnvironmentConfig, ExperimentConfig, IntervalKind};
pub use runner::{run_experiment, run_experiment_with, Execution, RunResult, StrategyRun};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Core(#[from] atb_core::Error),

    #[error("aggregation: {0}")]
    Aggregate(String),

    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;
