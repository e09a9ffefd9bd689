use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid fold state: {0}")]
    InvalidState(String),

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("frequency {freq_hz} Hz outside configured band [{min_hz}, {max_hz}]")]
    OutOfRange { freq_hz: f64, min_hz: f64, max_hz: f64 },

    #[error("negative capacitance {0:e} F (front-end configuration inconsistent with reading)")]
    NegativeCapacitance(f64),

    #[error("singular segment: height {0:e} m is zero")]
    Singular(f64),

    #[error("negative radicand {0:e} in volume curve (check curve constants)")]
    NegativeRadicand(f64),

    #[error("channels {0} and {1} short-circuit: strips intersect")]
    ShortCircuit(usize, usize),

    #[error("motion element {index} exceeds pattern limits: {reason}")]
    RangeViolation { index: usize, reason: String },

    #[error("recording is empty or too short to normalize")]
    EmptyRecording,

    #[error("recording has {frames} frames, need at least {needed}")]
    TooShort { frames: usize, needed: usize },

    #[error("recording and targets misaligned: {0}")]
    Misaligned(String),

    #[error("need at least 2 sessions, got {0}")]
    InsufficientSessions(usize),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{path}:{line}: expected {expected} channels, found {found}")]
    ChannelCountMismatch { path: PathBuf, line: usize, expected: usize, found: usize },

    #[error("marker {marker} missing at t = {ts_ms} ms")]
    MissingMarker { marker: u32, ts_ms: i64 },

    #[error("time ranges do not overlap")]
    NoOverlap,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("model format mismatch: {0}")]
    VersionMismatch(String),

    #[error("corrupt model file: {0}")]
    CorruptFile(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("primitives infeasible for pattern: {0}")]
    Infeasible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
