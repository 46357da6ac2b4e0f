use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigViolation;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {}", join(.0))]
    InvalidConfig(Vec<ConfigViolation>),

    #[error("no history")]
    EmptyWindow,

    #[error("malformed horizon: interval length {0} must be at least 1")]
    MalformedHorizon(usize),

    #[error("non-positive price {price} at index {index}")]
    NonPositivePrice { index: usize, price: f64 },

    #[error("series too short: need {needed} points, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid order from agent {agent}: {reason}")]
    InvalidOrder { agent: usize, reason: String },

    #[error("order book sort violation at level {level}")]
    SortViolation { level: usize },

    #[error("agent {agent} cannot deliver {needed} shares of stock {stock}, holds {held}")]
    Oversold { agent: usize, stock: usize, needed: u64, held: u64 },

    #[error("run with seed {seed} failed at step {step}")]
    InRun {
        seed: u64,
        step: usize,
        #[source]
        source: Box<SimError>,
    },

    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("{path} already holds output; pass the overwrite flag to replace it")]
    OutputExists { path: PathBuf },

    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv in {path}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

fn join(v: &[ConfigViolation]) -> String {
    v.iter().map(|e| e.message.as_str()).collect::<Vec<_>>().join("; ")
}

impl SimError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io { path: path.into(), source }
    }

    /// Whether the error stems from user input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            SimError::InvalidConfig(_)
                | SimError::Parse { .. }
                | SimError::InvalidParameter(_)
                | SimError::OutputExists { .. }
                | SimError::Csv { .. }
        )
    }

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        SimError::Csv { path: path.into(), source }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
