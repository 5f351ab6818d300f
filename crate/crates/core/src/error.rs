use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("non-finite value {value} at index {index} entering layer {layer}")]
    NonFinite {
        layer: String,
        index: usize,
        value: f64,
    },

    #[error("non-finite gradient {value} at index {index} of parameter {param}")]
    NonFiniteGradient {
        param: String,
        index: usize,
        value: f64,
    },

    #[error("backward called on {0} without a preceding training forward pass")]
    BackwardWithoutForward(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no interior minimum for bin {bin}: objective keeps decreasing toward the grid edge")]
    NoInteriorMinimum { bin: usize },

    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: u64, detail: String },

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("dataset {path}: {reason}")]
    Dataset { path: PathBuf, reason: String },

    #[error("{0}")]
    Eval(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(
        context: impl Into<String>,
        expected: &[usize],
        actual: &[usize],
    ) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
