use std::path::PathBuf;

use feedback_core::Error as CoreError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("missing {what}: {path} (run `feedbackctl {stage}` first)")]
    MissingPrerequisite {
        what: &'static str,
        stage: &'static str,
        path: PathBuf,
    },
    #[error("{stage} artifacts were built from a different config (hash {found}, current config gives {expected}); rerun `feedbackctl {stage}`")]
    HashMismatch {
        stage: &'static str,
        expected: String,
        found: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    BadArtifact { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::HashMismatch { .. } => 1,
            CliError::MissingPrerequisite { .. } | CliError::Io { .. } | CliError::BadArtifact { .. } => 2,
            CliError::Core(e) => match e {
                CoreError::Config(_) => 1,
                CoreError::NonFinite(_) | CoreError::Graph(_) => 3,
                _ => 2,
            },
        }
    }
}
