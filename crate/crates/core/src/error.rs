use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the estimation and testing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("sample covariance is singular or near-singular (eigenvalue {eigenvalue:e}, largest {largest:e})")]
    SingularCovariance { eigenvalue: f64, largest: f64 },

    #[error("response has no variation")]
    ConstantResponse,

    #[error("W discretization produced no usable cells")]
    NoUsableCells,

    #[error("slice {0} has no members")]
    EmptySlice(usize),

    #[error("score covariance is singular (condition number {0:e})")]
    SingularScore(f64),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unknown model family `{0}`")]
    UnknownFamily(String),

    #[error("gradient check failed for family `{family}`: relative error {error:e}")]
    GradientMismatch { family: String, error: f64 },

    #[error("unknown simulation case `{0}`")]
    UnknownCase(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
