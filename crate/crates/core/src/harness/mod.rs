//! Replicated experiments, rate fits, report files and the command line.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod stats;

pub use config::{ConfigError, ExperimentConfig, RawConfig, SchemeKind};
pub use experiment::{
    run_experiment, run_prepared, trajectory_csv, CheckpointRow, HarnessError, Prepared,
    RunOptions, RunSummary, SupRow,
};
pub use stats::{fit_rate, sup_error, RateFit, StatsError};
