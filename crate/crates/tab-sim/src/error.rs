//! Error type shared across the library.

use std::path::PathBuf;

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical or numeric parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A voltage or input grid violates its invariants (empty, unsorted, non-finite).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Two containers that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A network input lands outside the sane voltage window of the front end.
    #[error(
        "input {input} maps to {voltage} V, outside the sane window [{lo} V, {hi} V]"
    )]
    InputOutOfRange {
        input: f64,
        voltage: f64,
        lo: f64,
        hi: f64,
    },

    /// The singular value decomposition did not converge.
    #[error("singular value decomposition did not converge")]
    SvdFailed,

    /// A task declared as custom was evaluated without a target function attached.
    #[error("custom task has no target function attached")]
    MissingCustomTarget,

    /// An experiment configuration is inconsistent.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Reading or writing an experiment artifact failed.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A config file exists but does not parse as a configuration.
    #[error("failed to parse config {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    /// Serializing a report to JSON failed.
    #[error("failed to serialize report: {0}")]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
