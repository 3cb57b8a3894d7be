use std::path::PathBuf;

use crate::runtime::ExecutionMetrics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] srkrp_core::Error),

    /// Decoding failed after every task ran; the metrics are still valid.
    #[error("decode failed: {source}")]
    Decode {
        source: srkrp_core::Error,
        metrics: Box<ExecutionMetrics>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// Bad configuration; `line` is set when the problem came from a file.
    #[error("config error{}: `{key}`: {reason}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        key: String,
        reason: String,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Core(srkrp_core::Error::Parameter { .. } | srkrp_core::Error::Parse(_)) => 2,
            _ => 1,
        }
    }
}
