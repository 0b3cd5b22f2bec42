//! Config-driven experiment runner for the AFBM waveform lab.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

pub mod config;
pub mod run;

pub use config::{load_config, parse_config, Experiment, ExperimentConfig, Resolved};
pub use run::{run, RunOutput};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("invalid config [{section}]: {message}")]
    Invalid { section: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] afbm_core::Error),
}
