use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Model(#[from] tesla_servo_core::Error),
    #[error("check failed: {0}")]
    Check(String),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        HarnessError::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Process exit code: 2 config, 3 numerical, 4 failed `--check`.
    pub fn exit_code(&self) -> i32 {
        use tesla_servo_core::Error as E;
        match self {
            HarnessError::Io { .. } | HarnessError::Parse { .. } => 2,
            HarnessError::Model(E::Config { .. } | E::OutOfRange { .. } | E::InsufficientData(_)) => 2,
            HarnessError::Model(_) => 3,
            HarnessError::Check(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
