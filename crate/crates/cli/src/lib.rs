//! Experiment runner for the `xisim` engine: JSON configuration,
//! resumable experiments, checkpoints and report artifacts.

pub mod args;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::CliError;
pub use runner::{execute, resume, run, Outcome, Report, RunOptions};
