use std::path::PathBuf;

use thiserror::Error;

use crate::hybrid::ActionState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no transition: previous and next action are both {0}")]
    NoTransition(ActionState),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("innovation covariance is numerically singular (det = {det:e})")]
    SingularInnovation { det: f64 },

    #[error("training set has a single class ({0} events, all one label)")]
    SingleClass(usize),

    #[error("training set too small: {got} labeled events, need at least {need}")]
    TooFewEvents { got: usize, need: usize },

    #[error("solver did not converge after {0} iterations")]
    NotConverged(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("timestamps misaligned at index {index}: {a} vs {b}")]
    Misaligned { index: usize, a: f64, b: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
