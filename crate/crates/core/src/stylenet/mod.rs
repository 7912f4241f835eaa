//! The style-transfer network: encoder taps, attention refinement, AdaIN
//! alignment, edge-feature fusion and mirror decoding.

pub mod adain;
pub mod cbam;
pub mod decoder;
pub mod encoder;
pub mod ops;
pub mod weights;

pub use adain::adain;
pub use cbam::cbam_refine;
pub use decoder::decode;
pub use encoder::{encode, encode_taps};
pub use weights::{
    CbamWeights, DecoderWeights, EncoderVariant, EncoderWeights, WeightContainer, CBAM_REDUCTION,
    LEAKY_SLOPE,
};

use serde::{Deserialize, Serialize};

use crate::edge::EdgeMap;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::tensor::FeatureMap;

/// Everything needed to run the network forward.
#[derive(Debug, Clone)]
pub struct StyleWeights {
    pub encoder: EncoderWeights,
    pub decoder: DecoderWeights,
    pub cbam: CbamWeights,
}

impl StyleWeights {
    /// Self-contained seeded bundle on the half-width encoder.
    pub fn tiny(seed: u64) -> Self {
        let encoder = EncoderWeights::tiny();
        let channels = encoder.relu4_channels();
        Self {
            encoder,
            decoder: DecoderWeights::random(EncoderVariant::Tiny, seed),
            cbam: CbamWeights::random(channels, seed.wrapping_add(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StylizeConfig {
    /// Weight of the encoded edge features added onto the aligned content.
    pub edge_weight: f32,
}

impl Default for StylizeConfig {
    fn default() -> Self {
        Self { edge_weight: 1.0 }
    }
}

/// Adds the encoded edge features onto the AdaIN output:
/// `adacs + edge_weight · edge_fm`.
pub fn fuse(adacs: &FeatureMap, edge_fm: &FeatureMap, edge_weight: f32) -> Result<FeatureMap> {
    if adacs.shape() != edge_fm.shape() {
        return Err(Error::ShapeMismatch {
            left: format!("{:?}", adacs.shape()),
            right: format!("{:?}", edge_fm.shape()),
        });
    }
    let mut out = adacs.clone();
    for (o, e) in out.tensor.data_mut().iter_mut().zip(edge_fm.tensor.data()) {
        *o += edge_weight * e;
    }
    Ok(out)
}

/// Full forward pass: encode content/style/edge, refine the content features,
/// align them to the style statistics, add the edge features and decode.
///
/// Inputs of any size are reflect-padded to multiples of 8 and the output is
/// cropped back; the returned image is raw (not clamped).
pub fn stylize(
    content: &Image,
    style: &Image,
    edge: &EdgeMap,
    weights: &StyleWeights,
    cfg: &StylizeConfig,
) -> Result<Image> {
    if edge.height() != content.height() || edge.width() != content.width() {
        return Err(Error::EdgeMapSizeMismatch {
            image_h: content.height(),
            image_w: content.width(),
            edge_h: edge.height(),
            edge_w: edge.width(),
        });
    }
    let (content_pad, _, _) = content.replicate_rgb().pad_to_multiple(8);
    let (style_pad, _, _) = style.replicate_rgb().pad_to_multiple(8);
    let (edge_pad, _, _) = edge.to_image().replicate_rgb().pad_to_multiple(8);

    let f_c = encode(&content_pad, &weights.encoder)?;
    let refined = cbam_refine(&f_c, &weights.cbam)?;
    let f_s = encode(&style_pad, &weights.encoder)?;
    let adacs = adain(&refined, &f_s)?;
    let f_e = encode(&edge_pad, &weights.encoder)?;
    let fused = fuse(&adacs, &f_e, cfg.edge_weight)?;
    let out = decode(&fused, &weights.decoder)?;
    out.crop(0, 0, content.height(), content.width())
}
