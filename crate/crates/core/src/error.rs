use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected n = {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("unsupported dimension n = {0} for {1}")]
    UnsupportedDimension(usize, &'static str),
    #[error("log escalation beyond log^3 r in block (m = {m}, k = {k})")]
    LogGuard { m: u32, k: u32 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
