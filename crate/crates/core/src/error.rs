use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown goal `{0}`")]
    UnknownGoal(String),

    #[error("cyclic precondition chain: {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("goal `{goal}` at ({x:.3}, {y:.3}) is out of reach of the {arm} arm")]
    Unreachable {
        goal: String,
        arm: String,
        x: f64,
        y: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("{}: {message}", path.display())]
    EmptyInput { path: PathBuf, message: String },
}

impl Error {
    /// Process exit code for the CLI: 3 for numeric failures at run time,
    /// 2 for everything else (configuration, scenario and input problems).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
