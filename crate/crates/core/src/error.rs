use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the verification engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid interval at component {index}: lower {lower} > upper {upper}")]
    InvalidInterval { index: usize, lower: f64, upper: f64 },

    #[error("empty intersection at component {index}: [{lower}, {upper}] (gap {gap:e})")]
    EmptyIntersection {
        index: usize,
        lower: f64,
        upper: f64,
        gap: f64,
    },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("layer {layer}: {message}")]
    Shape { layer: usize, message: String },

    #[error("unknown activation {0:?} (expected relu, sigmoid or tanh)")]
    UnknownActivation(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bucket overlap: neuron {neuron} appears in more than one bucket")]
    BucketOverlap { neuron: usize },

    #[error("invalid input: {0}")]
    InvalidSpec(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
