use std::path::PathBuf;

use thiserror::Error;

use crate::io::pnm::PnmError;
use crate::pipeline::Stage;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid raster data: {0}")]
    InvalidData(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("point ({x}, {y}) lies on the horizon line of the homography")]
    Horizon { x: f64, y: f64 },

    #[error("invalid depth sample {0}")]
    InvalidDepth(f64),

    #[error("no mean flow supplied for component label {0}")]
    MissingFlow(u32),

    #[error("view {view}: stage {stage} failed: {source}")]
    Stage {
        view: usize,
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("calibration: {0}")]
    Calibration(String),

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("{path}: {reason}")]
    Path { path: PathBuf, reason: String },

    #[error("frame {frame}: {source}")]
    Frame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown scenario `{name}` (valid: {valid})")]
    UnknownScenario { name: String, valid: String },

    #[error(transparent)]
    Pnm(#[from] PnmError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_path(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Path {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}

pub(crate) fn ensure_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}
