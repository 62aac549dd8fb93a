use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the segmentation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate ({x}, {y}) outside {width}x{height} image")]
    OutOfBounds {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model is untrained")]
    Untrained,

    #[error("training error: {0}")]
    Training(String),

    #[error("class `{0}` has no pixels")]
    EmptyClass(&'static str),

    #[error("annotation contains no cells")]
    EmptyAnnotation,

    #[error("model format error: {0}")]
    Format(String),

    #[error("label {label} out of range (model has {num_labels} labels)")]
    LabelOutOfRange { label: usize, num_labels: usize },

    #[error("pixels {p:?} and {q:?} are not 8-adjacent")]
    NotAdjacent { p: (usize, usize), q: (usize, usize) },

    #[error("negative or non-finite capacity {0}")]
    BadCapacity(f64),

    #[error("cannot place {requested} cells: {reason}")]
    Packing { requested: usize, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
