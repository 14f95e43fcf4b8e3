use thiserror::Error;

use crate::backend::BackendError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch { expected: (u32, u32), found: (u32, u32) },

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("invalid RLE: {0}")]
    InvalidRle(String),

    #[error("similarity map contains a non-finite value at index {0}")]
    NonFinite(usize),

    #[error("mask is empty")]
    EmptyMask,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("{stage}: {source}")]
    Backend {
        stage: String,
        #[source]
        source: BackendError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn backend(stage: impl Into<String>) -> impl FnOnce(BackendError) -> Error {
        let stage = stage.into();
        move |source| Error::Backend { stage, source }
    }
}
