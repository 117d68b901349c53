//! Crate-wide error type with CLI exit-code mapping.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// Tensor/matrix shape disagreement, named after the offending op.
    #[error("shape mismatch in `{op}`: expected {expected}, got {actual}")]
    ShapeMismatch {
        op: String,
        expected: String,
        actual: String,
    },

    /// Invalid configuration or parameter combination.
    #[error("config error: {0}")]
    Config(String),

    /// Dataset, checkpoint, or report content problems.
    #[error("data error: {0}")]
    Data(String),

    /// Degenerate numerical input or diverged computation.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A gradient was requested through an op that has none.
    #[error("non-differentiable op `{0}` on the backward path")]
    NonDifferentiable(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SimError {
    pub fn shape(op: &str, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        SimError::ShapeMismatch {
            op: op.to_string(),
            expected: expected.into(),
            actual: actual.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    /// CLI contract: 0 success, 2 config error, 3 data error, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 2,
            SimError::Data(_) | SimError::Io { .. } | SimError::Json(_) => 3,
            SimError::Numerical(_) | SimError::NonDifferentiable(_) => 4,
            SimError::ShapeMismatch { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
