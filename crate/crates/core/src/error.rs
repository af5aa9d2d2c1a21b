use std::io;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter or configuration field failed validation. The field name
    /// uses the canonical config-file key (e.g. `mog2.history`, `counter.line`).
    #[error("invalid parameter `{field}`: {message}")]
    InvalidParam { field: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// Malformed input data: bad headers, truncated payloads, unparsable rows.
    /// The message carries the location (file, frame index, or line number).
    #[error("{0}")]
    Malformed(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

impl Error {
    pub fn invalid_param(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParam {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code this error maps to: 1 for validation failures,
    /// 2 for input/IO problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParam { .. } => 1,
            Error::Io { .. } | Error::Malformed(_) | Error::DimensionMismatch(_) => 2,
        }
    }
}
