//! Config-driven experiment runner for multiplicative SGD.
//!
//! Each command exercises one claim about M-SGD, writes CSV tables and a
//! `report.json`, and reports pass/fail verdicts. Outputs depend only on
//! the config and seed, never on the thread count.

pub mod config;
pub mod experiments;
pub mod histogram;
pub mod report;

use std::path::{Path, PathBuf};

pub use config::{validate_config, ConfigError, ExperimentConfig, COMMANDS};
pub use experiments::run_experiment;
pub use histogram::{emit_histogram, Bin, HistogramError};
pub use report::{Check, Comparison, ExperimentReport};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] msgd_core::Error),
    #[error(transparent)]
    Histogram(#[from] HistogramError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RunError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
