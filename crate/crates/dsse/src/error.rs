use std::path::PathBuf;

use dsse_core::DsseError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse {context}: {message}")]
    Parse { context: String, message: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: DsseError,
    },
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Self::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    /// CLI exit code: 2 for bad input, 3 for numerical or observability failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } | Self::Parse { .. } | Self::Input(_) => 2,
            Self::Core { source, .. } => match source {
                DsseError::Structure(_)
                | DsseError::Dimension { .. }
                | DsseError::InvalidInput(_)
                | DsseError::RxInfeasible { .. } => 2,
                _ => 3,
            },
        }
    }
}

/// Attaches context to core errors.
pub trait Context<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, DsseError> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| HarnessError::Core {
            context: context(),
            source,
        })
    }
}
