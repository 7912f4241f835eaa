//! Edge-aware AdaIN style transfer for vessel segmentation.
//!
//! The pipeline turns an angiogram frame into a binary vessel mask by
//! restyling it with a boundary-sketch style image: classical denoising and
//! top-hat enhancement, an encoder/AdaIN/decoder network with channel and
//! spatial attention plus edge-feature fusion, morphological
//! post-processing, and pixel-level scoring.

pub mod edge;
pub mod error;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod morph;
pub mod postprocess;
pub mod preprocess;
pub mod stylenet;
pub mod tensor;
pub mod trainer;

pub use edge::{detect_edges, EdgeMap, EdgeProviderConfig, EdgeProvenance};
pub use error::{Error, Result};
pub use image::{random_crop, BinaryMask, Image};
pub use losses::{
    content_loss, edge_loss, style_loss, total_loss, LossReport, LossWeights,
};
pub use metrics::{
    compute_metrics, confusion, evaluate_batch, BatchReport, ConfusionCounts, SegMetrics,
};
pub use postprocess::{binarize, cleanup, overlay, PostConfig, Polarity, ThresholdMode};
pub use preprocess::{denoise, preprocess, tophat_enhance, PreprocessConfig};
pub use stylenet::{
    adain, cbam_refine, decode, encode, encode_taps, fuse, stylize, CbamWeights, DecoderWeights,
    EncoderVariant, EncoderWeights, StyleWeights, StylizeConfig,
};
pub use tensor::{channel_stats, ChannelStats, FeatureMap, Tap, Tensor, STATS_EPS};
pub use trainer::{load_checkpoint, save_checkpoint, train, Checkpoint, TrainConfig};
