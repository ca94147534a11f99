use std::path::PathBuf;

/// Error type shared by all library modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Coordinate or index outside the valid range for its level/grid.
    #[error("range error: {0}")]
    Range(String),

    /// Tensor or grid dimensions inconsistent with the operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// An octree or feature map violates a structural invariant.
    #[error("structure error: {0}")]
    Structure(String),

    /// Invalid network or schedule configuration.
    #[error("config error: {0}")]
    Config(String),

    /// An operation was called in a way its contract forbids.
    #[error("contract error: {0}")]
    Contract(String),

    /// Malformed input file. `offset` is the byte position where parsing failed,
    /// when known.
    #[error("parse error: {msg}{}", offset.map(|o| format!(" (byte {o})")).unwrap_or_default())]
    Parse { msg: String, offset: Option<usize> },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse {
            msg: msg.into(),
            offset: None,
        }
    }

    pub fn parse_at(msg: impl Into<String>, offset: usize) -> Self {
        Error::Parse {
            msg: msg.into(),
            offset: Some(offset),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
