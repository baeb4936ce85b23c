use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate axis: {0}")]
    DegenerateAxis(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("weight underflows to zero at node {index} (v = {v})")]
    WeightUnderflow { index: usize, v: f64 },

    #[error("quadrature weight {value:e} at node {index} is below the configured floor {floor:e}")]
    WeightBelowFloor {
        index: usize,
        value: f64,
        floor: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rank {rank} exceeds the configured ceiling {ceiling} at step {step}")]
    RankCeiling {
        rank: usize,
        ceiling: usize,
        step: usize,
    },

    #[error("dense export of {entries} entries exceeds the limit of {limit}")]
    DenseGuard { entries: usize, limit: usize },

    #[error("non-finite values in the solution at step {step}")]
    NonFinite { step: usize },

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        });
    }
    Ok(())
}
