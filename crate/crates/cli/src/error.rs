use std::path::PathBuf;

/// Everything that can end a command, mapped onto the exit codes
/// 1 (usage), 2 (domain or infeasibility) and 3 (I/O and file format).
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Domain(#[from] safety_evidence::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}:{column}: {message}", path.display())]
    Format {
        path: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Domain(_) => 2,
            Self::Io { .. } | Self::Format { .. } => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(
        path: impl Into<PathBuf>,
        line: u64,
        column: usize,
        message: impl Into<String>,
    ) -> Self {
        Self::Format {
            path: path.into(),
            line,
            column,
            message: message.into(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
