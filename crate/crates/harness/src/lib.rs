//! Experiment runner behind the `grpdal-kit` binary.

pub mod cache;
pub mod check;
pub mod config;
pub mod output;
pub mod pgm;
pub mod runner;

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(#[from] config::ConfigError),

    /// Bad input data other than the config text itself, e.g. a malformed image.
    #[error("input error: {0}")]
    Input(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Pgm(#[from] pgm::PgmError),

    #[error("{solver} (seed {seed}) failed: {source}")]
    Solver {
        solver: String,
        seed: u64,
        #[source]
        source: grpdal_core::Error,
    },

    #[error(transparent)]
    Core(#[from] grpdal_core::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("schema mismatch: {0}")]
    Schema(String),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for bad user input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Input(_) => 1,
            _ => 2,
        }
    }
}
