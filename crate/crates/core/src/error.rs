use std::path::PathBuf;

use crate::types::Stream;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid 2D box: {0}")]
    InvalidBox2D(String),
    #[error("invalid 3D box: {0}")]
    InvalidBox3D(String),
    #[error("invalid detection: {0}")]
    InvalidDetection(String),
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("every corner of the 3D box lies behind the camera")]
    AllBehindCamera,
    #[error("projected box has zero area after clipping to the image")]
    DegenerateProjection,

    #[error("detection has no {0} box")]
    MissingBox(&'static str),
    #[error("filter state decodes to a non-positive extent")]
    NonPositiveExtent,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("detection {det_id} at frame {frame} carries no embedding")]
    MissingEmbedding { frame: usize, det_id: u64 },

    #[error("{stream} stream expected frame {expected}, got {got}")]
    FrameOrderViolation {
        stream: Stream,
        expected: usize,
        got: usize,
    },
    #[error("calibration missing")]
    CalibrationMissing,

    #[error("infeasible scene: {0}")]
    InfeasibleScene(String),
    #[error("frame mismatch: {0}")]
    FrameMismatch(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
