use thiserror::Error;

/// Errors shared by all operator-calculus modules.
#[derive(Debug, Error)]
pub enum CordesError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("fiber set mismatch: {0}")]
    FiberMismatch(String),

    #[error("unknown fiber label `{0}`")]
    UnknownFiber(String),

    #[error("domain side mismatch: expected {expected}, got {got}")]
    SideMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("effective support violated: {0}")]
    EffectiveSupport(String),

    #[error("grid too large for {op}: {detail}")]
    GridTooLarge { op: &'static str, detail: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error in field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CordesError>;
