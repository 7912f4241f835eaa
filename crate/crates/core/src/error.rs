use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty feature map")]
    EmptyFeatureMap,

    #[error("crop larger than image: {height}x{width} image, {size}x{size} crop")]
    CropLargerThanImage {
        height: usize,
        width: usize,
        size: usize,
    },

    #[error("edge map size mismatch: image is {image_h}x{image_w}, edge map is {edge_h}x{edge_w}")]
    EdgeMapSizeMismatch {
        image_h: usize,
        image_w: usize,
        edge_h: usize,
        edge_w: usize,
    },

    #[error("channel mismatch: {left} vs {right}")]
    ChannelMismatch { left: usize, right: usize },

    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{op}: spatial dims must be multiples of {multiple}, got {height}x{width}")]
    NotMultipleOf {
        op: &'static str,
        multiple: usize,
        height: usize,
        width: usize,
    },

    #[error("weight container: {0}")]
    WeightContainer(String),

    #[error("weight container: missing layer `{0}`")]
    MissingLayer(String),

    #[error("non-finite {term} loss at iteration {iteration}")]
    NonFiniteLoss { term: &'static str, iteration: u64 },

    #[error("{0}")]
    InvalidConfig(String),

    #[error("no readable images in {0}")]
    EmptyDirectory(PathBuf),

    #[error("unmatched filenames between prediction and ground-truth directories: {0}")]
    UnmatchedFiles(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    ImageCodec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
