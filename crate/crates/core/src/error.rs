//! Crate-wide error type.

use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors reported by the simulation library.
#[derive(Debug)]
pub enum Error {
    /// A physical or controller parameter violates its invariant.
    InvalidParams { unit_id: String, message: String },
    /// A weighting strategy cannot be applied to the given unit set.
    StrategyInapplicable { message: String },
    /// Allocation weights do not sum to one (or contain negative entries).
    InvalidWeights { message: String },
    /// A stationary solution fell outside the non-negative-load regime.
    RegimeViolation { p0_kw: f64 },
    /// The feedforward slope does not reject the outdoor temperature, so the
    /// requested tuning is ill-defined.
    NotWellTuned { residual: f64 },
    /// Weather CSV input is malformed; `row` is the 1-based line number.
    WeatherCsv { row: usize, message: String },
    /// A weather sample was requested outside the covered time span.
    WeatherRange { t_h: f64, first_h: f64, last_h: f64 },
    /// Scenario configuration is inconsistent.
    Scenario { message: String },
    /// A state variable became non-finite during simulation.
    NonFinite { unit_id: String, t_h: f64 },
    /// An input file could not be read.
    MissingInput {
        path: String,
        source: std::io::Error,
    },
    /// An output file could not be written.
    Io(std::io::Error),
    /// Structured-text (de)serialization failure.
    Format(serde_json::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParams { unit_id, message } => {
                write!(f, "invalid parameters for unit {unit_id}: {message}")
            }
            Error::StrategyInapplicable { message } => {
                write!(f, "strategy not applicable: {message}")
            }
            Error::InvalidWeights { message } => write!(f, "invalid weights: {message}"),
            Error::RegimeViolation { p0_kw } => write!(
                f,
                "stationary load is negative ({p0_kw} kW): the non-negative-load regime \
                 does not hold at this operating point"
            ),
            Error::NotWellTuned { residual } => write!(
                f,
                "feedforward slope is not tuned to reject the outdoor temperature \
                 (residual {residual}); retune a1 first"
            ),
            Error::WeatherCsv { row, message } => {
                write!(f, "weather CSV row {row}: {message}")
            }
            Error::WeatherRange {
                t_h,
                first_h,
                last_h,
            } => write!(
                f,
                "time {t_h} h outside weather coverage [{first_h}, {last_h}] h"
            ),
            Error::Scenario { message } => write!(f, "invalid scenario: {message}"),
            Error::NonFinite { unit_id, t_h } => write!(
                f,
                "state of unit {unit_id} became non-finite at t = {t_h} h"
            ),
            Error::MissingInput { path, source } => {
                write!(f, "cannot read {path}: {source}")
            }
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::Format(e) => write!(f, "format error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::MissingInput { source, .. } => Some(source),
            Error::Io(e) => Some(e),
            Error::Format(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e)
    }
}

impl Error {
    /// True for errors caused by bad inputs or configuration, as opposed to
    /// runtime/numerical failures. Callers use this to pick exit codes.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::NonFinite { .. } | Error::Io(_))
    }
}
