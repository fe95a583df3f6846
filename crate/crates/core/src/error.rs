use std::path::Path;

/// Toolkit-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A constructor or operation precondition was violated.
    #[error("{0}")]
    Validation(String),
    /// A file had the right encoding but malformed content.
    #[error("{path}:{line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },
    /// Underlying I/O failure, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Synthetic scene generation could not satisfy its constraints.
    #[error("scene generation failed: {0}")]
    Generation(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn format(path: impl AsRef<Path>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().display().to_string(),
            line,
            msg: msg.into(),
        }
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code contract: 2 for validation-class errors, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Format { .. } | Error::Generation(_) => 2,
            Error::Io { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
