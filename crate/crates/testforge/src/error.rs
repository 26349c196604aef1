use std::path::PathBuf;

use testforge_core::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum TfError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: testforge_core::Error,
    },
    /// A stage failed; `last_persisted` names the newest artifact on disk.
    #[error("stage {stage} failed (last persisted stage: {}): {message}", last_persisted.as_deref().unwrap_or("none"))]
    Stage {
        stage: String,
        last_persisted: Option<String>,
        message: String,
    },
    #[error(transparent)]
    Core(#[from] testforge_core::Error),
}

impl TfError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TfError::Io { path: path.into(), source }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            TfError::Config(_) => 2,
            _ => 3,
        }
    }
}

impl From<ModelError> for TfError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(m) => TfError::Config(m),
            other => TfError::Core(other.into()),
        }
    }
}

pub type TfResult<T> = Result<T, TfError>;
