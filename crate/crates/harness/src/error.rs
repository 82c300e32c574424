use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] fssd_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {msg}")]
    Ingest { line: u64, msg: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("surface scans support d = 1 or 2, got d = {0}; fix the other coordinates and scan a slice")]
    UnsupportedScan(usize),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
