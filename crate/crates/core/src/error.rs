//! Library error type.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A query set is malformed or incompatible with the instance.
    #[error("invalid query set: {0}")]
    InvalidQuerySet(String),

    /// A numeric or structural parameter is out of range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An input lies outside the domain of the requested operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A statistic was read before any observation arrived.
    #[error("statistic has no observations")]
    NoObservations,

    /// A rate function does not reach the requested accuracy in time.
    #[error("rate function does not reach {alpha} within {horizon} steps")]
    HorizonExceeded { alpha: f64, horizon: u64 },

    /// A limit profile violates a structural assumption.
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    /// No arm satisfies the requested winner notion.
    #[error("no winner: {0}")]
    NoWinner(String),

    /// An environment refused a pull because its budget cap was reached.
    #[error("budget cap of {cap} pulls exhausted")]
    BudgetExhausted { cap: u64 },

    /// The environment or configuration does not support the operation.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A configuration file could not be understood.
    #[error("configuration error: {0}")]
    Config(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// CSV reading or writing failure.
    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// JSON reading or writing failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;
