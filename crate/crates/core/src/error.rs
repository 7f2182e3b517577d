use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator and the QoE modeling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry violation: distance {distance_m} m is below the minimum {min_distance_m} m")]
    GeometryViolation { distance_m: f64, min_distance_m: f64 },

    #[error("decision space too large: {n} users exceeds the enumeration guard of {max}")]
    DecisionSpaceTooLarge { n: usize, max: usize },

    #[error(
        "decision space of {candidates} candidates exceeds limit {limit} (limiting dimension: {dimension})"
    )]
    DecisionSpaceExceeded {
        candidates: u128,
        limit: u64,
        dimension: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("no observed entries in QoE matrix")]
    NoObservations,

    #[error("unknown {kind} id {id}")]
    UnknownId { kind: &'static str, id: usize },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user-supplied configuration.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
