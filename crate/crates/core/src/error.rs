use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("state error: {0}")]
    State(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A plain per-patch normalization layer was found in a graph that is
    /// about to be executed patch-wise.
    #[error(
        "layer {layer} uses plain `{variant}` normalization: statistics computed per patch \
         make neighbouring stylized patches inconsistent in style; use the thumbnail-conditioned \
         variant (tin/tiw) or explicitly allow plain normalization to reproduce the artefact"
    )]
    InconsistentNorm { layer: usize, variant: &'static str },

    #[error("weight file has bad magic bytes (expected `URSTW1`)")]
    BadMagic,

    #[error("weight file truncated while reading {0}")]
    Truncated(&'static str),

    #[error("weight file contains duplicate tensor name `{0}`")]
    DuplicateName(String),

    #[error("unsupported dtype tag {0} (only 0 = f32 is supported)")]
    UnsupportedDtype(u8),

    #[error("weight file has {0} trailing bytes")]
    TrailingBytes(usize),

    #[error("missing weight `{0}`")]
    MissingWeight(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("png encoding error: {0}")]
    Png(#[from] png::EncodingError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

macro_rules! shape_err {
    ($($arg:tt)*) => { $crate::error::Error::Shape(format!($($arg)*)) };
}
macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(format!($($arg)*)) };
}
pub(crate) use config_err;
pub(crate) use shape_err;
