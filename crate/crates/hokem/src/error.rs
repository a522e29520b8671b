//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HokemError {
    /// Incompatible tensor/matrix dimensions, naming both shapes.
    #[error("{op}: dimension mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid configuration value (unknown joint name, bad beta, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Keypoint normalization rejected a sample (missing shoulders/hips,
    /// degenerate upper-body diagonal).
    #[error("normalization rejected sample: {0}")]
    Normalization(String),

    /// A record failed schema validation; `pointer` is a JSON pointer into
    /// the offending record.
    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged at epoch {epoch}: {message}")]
    Diverged { epoch: usize, message: String },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HokemError>;
