use thiserror::Error;

/// Errors raised by the estimation pipeline and its supporting types.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid depth sample: z = {0} (must be finite and > 0)")]
    InvalidSample(f64),
    #[error("point is behind the camera: z = {0}")]
    BehindCamera(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid bounding box: {0}")]
    InvalidBoundingBox(String),
    #[error("region of interest has no usable samples")]
    EmptyRoi,
    #[error("depth clustering produced no cluster")]
    NoTarget,
    #[error("no hand detection in frame")]
    NoHand,
    #[error("pointing direction is degenerate (zero length)")]
    DegenerateDirection,
    #[error("pointing ray does not descend to the ground plane (P_z = {0})")]
    NoGroundIntersection(f64),
    #[error("timestamp {current} does not follow {previous}")]
    NonMonotonicTimestamp { previous: f64, current: f64 },
    #[error("malformed frame record: {0}")]
    MalformedFrame(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),
    #[error("pose cannot be rendered: {0}")]
    PoseUnrenderable(String),
    #[error("config parse error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
