use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("infeasible link: {0}")]
    Infeasible(String),

    #[error("quadrature did not reach tolerance {tolerance:e} on [{lower}, {upper}] (estimated error {estimate:e})")]
    Quadrature {
        lower: f64,
        upper: f64,
        tolerance: f64,
        estimate: f64,
    },

    #[error("root search did not converge: {0}")]
    RootSearch(String),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("missing observation for case {0}")]
    MissingObservation(String),

    #[error("insufficient history before {date}: need {needed} days, first date is {first}")]
    InsufficientHistory {
        date: chrono::NaiveDate,
        first: chrono::NaiveDate,
        needed: u32,
    },

    #[error("no training cases with observations in the window before {date}{scope}")]
    NoTrainingData { date: chrono::NaiveDate, scope: String },

    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("singular covariance estimate in uniformity test")]
    SingularCovariance,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("misaligned inputs: {0}")]
    Misaligned(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for bad input, 2 for runtime and convergence failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::LengthMismatch { .. }
            | Error::Empty(_)
            | Error::MissingObservation(_)
            | Error::InsufficientHistory { .. }
            | Error::Parse { .. }
            | Error::Config { .. }
            | Error::Misaligned(_)
            | Error::Csv(_)
            | Error::Json(_) => 1,
            _ => 2,
        }
    }
}
