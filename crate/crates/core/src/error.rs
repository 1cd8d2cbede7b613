use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("table: {0}")]
    Table(String),

    #[error("failed to read {path}: {source}")]
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

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid scenario: {key}: {msg}")]
    Validation { key: String, msg: String },

    #[error("discretization failed in interval {interval}: non-finite values")]
    Discretization { interval: usize },

    #[error("min-Mach row rejected at node {node}: nominal speed {speed:.3e} ft/s below 1 ft/s")]
    DegenerateSpeed { node: usize, speed: f64 },

    #[error("pursuer time bound {bound:.3} s does not exceed the lower time bound {lower:.3} s")]
    StructurallyInfeasible { bound: f64, lower: f64 },

    #[error("conic solver: {0}")]
    Solver(String),

    #[error("simulation: {0}")]
    Simulation(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(PathBuf),

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code: 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. }
            | Error::Parse { .. }
            | Error::Table(_)
            | Error::Io { .. }
            | Error::MissingArtifact(_) => 2,
            _ => 3,
        }
    }
}
