//! Experiment drivers for the `z2metts` command.

pub mod calibrate;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod reference;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{CliError, Result};
