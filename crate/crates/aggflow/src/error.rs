//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong outside of ordinary run outcomes
/// (blow-up and timeout are run statuses, not errors).
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An evaluation hit a singular configuration (coincident particles,
    /// non-increasing quantile data, kernel at the origin, ...).
    #[error("singular configuration: {0}")]
    Singular(String),

    /// Two states with different particle counts were combined.
    #[error("size mismatch: {left} vs {right} particles")]
    SizeMismatch { left: usize, right: usize },

    /// An explicit step produced positions out of order.
    #[error("explicit step violated the particle ordering")]
    OrderingViolated,

    /// A rate fit was rejected (bad window, nonpositive data, too few samples).
    #[error("rate fit rejected: {0}")]
    FitRejected(String),

    /// Malformed input file or command-line grid expression.
    #[error("parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
