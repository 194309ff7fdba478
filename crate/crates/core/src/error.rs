//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the simulator, environment, and learning components.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A vector or matrix had the wrong length for the operation.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// Sampling was requested from an empty replay buffer.
    #[error("cannot sample from an empty replay buffer")]
    EmptyBuffer,

    /// A computation produced or received a NaN/inf where a finite value is
    /// required (e.g. gradients fed to the optimizer).
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    /// An argument was structurally invalid (zero sizes, bad ranges, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Statistics were too degenerate to use (e.g. zero variance where a
    /// normalizer needs a scale).
    #[error("degenerate statistics: {0}")]
    DegenerateStatistics(String),

    /// A checkpoint or serialized artifact could not be parsed.
    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),

    /// A linear system arising in exact policy evaluation was singular.
    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
