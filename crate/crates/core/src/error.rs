use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
///
/// The variants are coarse on purpose: the command-line front end maps each
/// one onto a process exit code (`Config` → 2, `Io`/`Format` → 3, the rest → 4).
#[derive(Debug, Error)]
pub enum LfError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{what} ({value}) is not divisible by {divisor}")]
    Divisibility {
        what: &'static str,
        value: usize,
        divisor: usize,
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("training diverged: {0}")]
    Diverged(String),
}

impl LfError {
    pub fn shape(msg: impl Into<String>) -> Self {
        LfError::Shape(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        LfError::Invalid(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        LfError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LfError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        LfError::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            LfError::Shape(_) => "shape",
            LfError::Divisibility { .. } => "divisibility",
            LfError::NonFinite(_) => "non_finite",
            LfError::Invalid(_) => "invalid",
            LfError::Degenerate(_) => "degenerate",
            LfError::Config(_) => "config",
            LfError::Format { .. } => "format",
            LfError::Io { .. } => "io",
            LfError::Diverged(_) => "diverged",
        }
    }
}

pub type Result<T> = std::result::Result<T, LfError>;

pub(crate) fn check_divisible(what: &'static str, value: usize, divisor: usize) -> Result<()> {
    if divisor == 0 || value % divisor != 0 {
        return Err(LfError::Divisibility {
            what,
            value,
            divisor,
        });
    }
    Ok(())
}
