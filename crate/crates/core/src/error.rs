use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("index {index} out of range for {len} elements")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("grid does not span the acquisition domain: {0}")]
    GridMismatch(String),

    #[error("incidence angle {theta} rad exceeds the critical angle (1 - sin^2/n^2 = {radicand})")]
    CriticalAngle { theta: f64, radicand: f64 },

    #[error("non-positive or non-finite amplitude {value} at (t={tx}, r={rx})")]
    NonPositiveAmplitude { tx: usize, rx: usize, value: f64 },

    #[error("reflector depth mismatch: {measured} m vs {calibration} m")]
    DepthMismatch { measured: f64, calibration: f64 },

    #[error("shape {index} extends outside the imaging domain")]
    ShapeOutsideDomain { index: usize },

    #[error("contrast undefined: {0}")]
    ZeroContrast(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(expected: usize, actual: usize, context: &'static str) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            actual,
            context,
        })
    }
}
