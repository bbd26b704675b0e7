use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    /// Malformed tensor file; `field` names the header field or section at fault.
    #[error("tensor format error in {field}: {detail}")]
    Format { field: &'static str, detail: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("out of bounds: {0}")]
    Bounds(String),

    #[error("degenerate line: {0}")]
    DegenerateLine(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid depth {0} (must be > 0)")]
    InvalidDepth(f64),

    #[error("point is behind the camera (Z = {0})")]
    BehindCamera(f64),

    #[error("empty scene: {0}")]
    EmptyScene(String),

    #[error("invalid intrinsics: {0}")]
    Intrinsics(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn format(field: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            field,
            detail: detail.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
