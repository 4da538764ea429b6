//! Configuration, initial conditions, snapshots and CSV export.

pub mod config;
pub mod csv;
pub mod presets;
pub mod snapshot;

use std::path::PathBuf;

pub use config::{emit_config, parse_config, Initial, Mode, RunConfig};
pub use presets::Preset;
pub use snapshot::{read_snapshot, write_snapshot, Snapshot};

/// Failures of the operational layer.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("config line {line}: {message}")]
    ConfigLine { line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] crate::error::Error),
}

impl IoError {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> IoError {
        IoError::File {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> IoError {
        IoError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type IoResult<T> = std::result::Result<T, IoError>;
