//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by channel construction, combining, and position optimization.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument violated a documented precondition (non-finite value,
    /// empty input, dimension mismatch, out-of-range virtual AoA, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A run configuration is structurally invalid.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// The user channel Gram matrix is rank deficient or too ill-conditioned
    /// for zero-forcing (condition number above {MAX_CONDITION:e}).
    #[error("singular channel: {0}")]
    SingularChannel(String),

    /// The requested construction or selection cannot satisfy its
    /// constraints (tightness condition, spacing, grid capacity, ...).
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Two users share a virtual angle of arrival on the axis that was
    /// supposed to separate them.
    #[error("degenerate angles: {0}")]
    DegenerateAngles(String),

    /// An exhaustive enumeration was refused because the instance is too
    /// large to search.
    #[error("instance too large: {0}")]
    TooLarge(String),
}

/// Condition-number ceiling for the K x K user Gram matrix. Beyond this the
/// zero-forcing solution is numerically meaningless and we fail loudly
/// instead of regularizing.
pub const MAX_CONDITION: f64 = 1e12;
