use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while loading data, training or evaluating.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range (length {len})")]
    Bounds { index: usize, len: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("XML parse error at line {line}: {message}")]
    Parse { line: u32, message: String },

    #[error(
        "unsupported imzML spectrum mode '{0}': only continuous mode is supported, \
         bin the spectra onto a common m/z axis first"
    )]
    UnsupportedMode(String),

    #[error("unsupported binary encoding: {0}")]
    UnsupportedEncoding(String),

    #[error(
        "compressed binary arrays are not supported ({0}); re-export the imzML without compression"
    )]
    UnsupportedCompression(String),

    #[error("corrupt binary store: {0}")]
    CorruptStore(String),

    #[error("bin edges do not overlap the m/z axis, the binned axis would be empty")]
    EmptyAxis,

    #[error("incompatible inputs: {0}")]
    Compatibility(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
