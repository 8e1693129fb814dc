use std::io;

use thiserror::Error;

/// Errors raised across the interpolation, selection, and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported pairing: {0}")]
    UnsupportedPairing(String),

    /// Adaptive quadrature ran out of budget before reaching its tolerance.
    #[error("quadrature did not converge: value {value:e}, error estimate {estimate:e} > tolerance {tolerance:e}")]
    Accuracy {
        value: f64,
        estimate: f64,
        tolerance: f64,
    },

    /// The functional is numerically in the span of the current selection.
    #[error("near-dependent functional {functional}{}: power {power:e} <= threshold {threshold:e}",
        .candidate.map(|i| format!(" (candidate {i})")).unwrap_or_default())]
    NearDependence {
        functional: String,
        candidate: Option<usize>,
        power: f64,
        threshold: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Whether the error stems from numerics rather than from inputs or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Accuracy { .. } | Error::NearDependence { .. } | Error::UnsupportedPairing(_)
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
