use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, WimoError>;

#[derive(Debug, thiserror::Error)]
pub enum WimoError {
    #[error(transparent)]
    Core(#[from] wimo_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl WimoError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        WimoError::Io {
            path: path.into(),
            source,
        }
    }
}
