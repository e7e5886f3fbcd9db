//! Crate-wide error type. Variants carry enough context to be actionable from
//! the CLI without a backtrace.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum S2iError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("bad format in {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("non-finite value in {context} at iteration {iteration}{}",
            .checkpoint.as_ref().map(|p| format!(" (last good checkpoint: {p})")).unwrap_or_default())]
    NonFinite {
        context: String,
        iteration: u64,
        checkpoint: Option<String>,
    },
}

pub type S2iResult<T> = Result<T, S2iError>;

impl S2iError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        S2iError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<String>, reason: impl Into<String>) -> Self {
        S2iError::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn shape(
        context: impl Into<String>,
        expected: impl Into<String>,
        actual: impl Into<String>,
    ) -> Self {
        S2iError::Shape {
            context: context.into(),
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}
