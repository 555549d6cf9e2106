//! Crate-wide error type.

use num_rational::Rational64;
use thiserror::Error;

/// Errors surfaced by parsing, evaluation, and geometric operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Expression source text failed to parse.
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    /// Evaluation left the domain of an elementary function
    /// (log/sqrt of a non-positive value, division by zero).
    #[error("domain violation: {0}")]
    Domain(String),

    /// Dimension or slot mismatch between operands.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The gauge metric is not invertible at the requested point.
    #[error("singular metric at the evaluation point")]
    SingularMetric,

    /// The immersion differential does not have full rank.
    #[error("rank-deficient immersion: {0}")]
    RankDeficient(String),

    /// A Möbius or Laplace structure is required but absent.
    #[error("missing structure: {0}")]
    MissingStructure(String),

    /// A density has the wrong conformal weight for the operator.
    #[error("weight mismatch: expected {expected}, got {got}")]
    WeightMismatch {
        expected: Rational64,
        got: Rational64,
    },

    /// The integrator or a solve failed numerically.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Scenario file is syntactically valid but semantically unusable.
    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
