//! Command-line driver for the XL-MIMO experiments: configuration handling,
//! CSV output and run sidecars.

pub mod config;
pub mod run;

use std::path::PathBuf;

pub use config::{resolve, Experiment, Plan, RawConfig, RunConfig};
pub use run::{execute, render_csv, run, write_outputs, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] xlmimo::Error),
}

impl CliError {
    /// 1 for configuration and I/O problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}
