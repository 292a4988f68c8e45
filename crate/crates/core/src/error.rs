use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("no trials recorded for setting combination a{i}b{j}")]
    InsufficientData { i: u8, j: u8 },

    #[error("degenerate denominator: eps_minus = {eps_minus} must be below 1")]
    DegenerateDenominator { eps_minus: f64 },

    #[error("infeasible experiment: {0}")]
    Infeasible(String),

    #[error("no sign change of the optimized CH-E value on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("trial index {index} does not follow {previous}")]
    OutOfOrder { previous: u64, index: u64 },

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: u64, msg: String },

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
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible(_) => 3,
            Error::Io { .. } | Error::Json(_) => 4,
            Error::Csv(e) if e.is_io_error() => 4,
            _ => 2,
        }
    }
}
