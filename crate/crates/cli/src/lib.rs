//! Experiment harness around the `tiltlab` core: configuration files,
//! seeded multi-run execution, baseline pretraining, the burn-in sweep,
//! cross-run aggregation, and the numerical self-checks (bound
//! certification, gradient verification).
//!
//! The binary maps errors to exit codes: `0` on success, `1` when a run
//! fails mid-flight, `2` when the configuration is rejected before any
//! compute starts.

use thiserror::Error;

pub mod agg;
pub mod checks;
pub mod config;
pub mod evalcmd;
pub mod pretrain;
pub mod run;
pub mod sweep;

/// Harness-level error split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Rejected before any compute; the binary exits with code 2.
    #[error("{0}")]
    Config(String),
    /// Failure during execution; the binary exits with code 1.
    #[error(transparent)]
    Run(#[from] anyhow::Error),
}

impl From<tiltlab::CoreError> for CliError {
    fn from(e: tiltlab::CoreError) -> Self {
        CliError::Run(anyhow::Error::new(e))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(anyhow::Error::new(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
