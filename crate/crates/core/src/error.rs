use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter or configuration value. `key` names the offending
    /// setting, e.g. `physics.delta`.
    #[error("invalid configuration `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e}, target {target:.3e})")]
    Solver {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("CFL violation in {stage}: dt = {dt:.6e} exceeds the admissible {limit:.6e}")]
    Cfl {
        stage: &'static str,
        dt: f64,
        limit: f64,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("time {t} outside stored velocity history [{start}, {end}]")]
    OutsideHistory { t: f64, start: f64, end: f64 },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input or configuration rather than a
    /// failure during the computation itself.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Config { .. } | Error::Input(_) | Error::Format { .. } | Error::Io { .. } => true,
            Error::Stage { .. } => false,
            _ => false,
        }
    }
}
