use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),

    #[error("simulation diverged to a non-finite state at step {step}")]
    Divergence { step: usize },

    #[error("Newton step is singular: score derivative {value:e} at theta {theta}")]
    SingularStep { theta: f64, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for configuration problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::Config(_)
            | Error::Io { .. }
            | Error::Parse { .. } => 2,
            Error::DegenerateSample(_) | Error::Divergence { .. } | Error::SingularStep { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
