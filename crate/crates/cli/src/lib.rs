//! Experiment runner for Network Evolution Chains: configuration, dispatch
//! and the files each experiment writes.

pub mod config;
pub mod error;
pub mod run;

pub use config::{ConfigFile, ExperimentConfig, ExperimentKind, Overrides};
pub use error::{CliError, Result};
pub use run::{run, RunReport};
