use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("no events")]
    NoEvents,

    #[error("invalid cascade {cascade_id}: {message}")]
    InvalidCascade { cascade_id: String, message: String },

    #[error("non-positive sample {value} at index {index}")]
    NonPositiveSample { index: usize, value: f64 },

    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },

    #[error("insufficient support: {occupied} occupied bins, need {required}")]
    InsufficientSupport { occupied: usize, required: usize },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown metric '{0}'")]
    UnknownMetric(String),

    #[error("cascade store: {0}")]
    Store(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
