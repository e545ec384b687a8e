use std::path::PathBuf;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const PROPERTY_FAILED: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const UNTRUSTED: u8 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("writing {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Numeric(#[from] polycarleson_core::Error),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Usage(_) | AppError::Config(_) | AppError::Read { .. } => exit::USAGE,
            AppError::Numeric(polycarleson_core::Error::TooFewPoints { .. }) => exit::UNTRUSTED,
            _ => exit::PROPERTY_FAILED,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
