use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("requested resource too large: {0}")]
    Resource(String),

    #[error(
        "invalid mesh: cell {cell} has non-positive Jacobian determinant {det:e} at reference point ({x:.4}, {y:.4})"
    )]
    InvalidMesh { cell: usize, det: f64, x: f64, y: f64 },

    #[error("diffusion coefficient is not symmetric positive definite at ({x:.4}, {y:.4})")]
    InvalidCoefficient { x: f64, y: f64 },

    #[error("function belongs to a {found} space, expected a {expected} space")]
    WrongSpaceKind {
        expected: &'static str,
        found: &'static str,
    },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("linear solver failed after {iterations} iterations, relative residual {residual:e}: {reason}")]
    SolverFailure {
        iterations: usize,
        residual: f64,
        reason: String,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("time interval {interval}: {source}")]
    Interval {
        interval: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("level {level}, stage `{stage}`: {source}")]
    Stage {
        level: u32,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed input: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
