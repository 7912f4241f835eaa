//! Weight containers and network parameter sets.
//!
//! A container is a directory holding `manifest.json` (ordered entries with
//! name, shape, dtype, byte offset and byte length) plus `weights.bin`
//! (little-endian f32, row-major). Encoder, decoder, attention and
//! checkpoint weights all use the same layout.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stylenet::ops::{Conv3x3, ConvKxK};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

/// In-memory weight container: ordered (name, shape, data) triples.
#[derive(Debug, Clone, Default)]
pub struct WeightContainer {
    entries: Vec<(String, Vec<usize>, Vec<f32>)>,
}

impl WeightContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) {
        let name = name.into();
        debug_assert_eq!(shape.iter().product::<usize>(), data.len(), "{name}");
        self.entries.push((name, shape, data));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<(&[usize], &[f32])> {
        self.entries
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, s, d)| (s.as_slice(), d.as_slice()))
    }

    /// Fetches an entry, checking its shape; errors name the missing layer.
    pub fn require(&self, name: &str, shape: &[usize]) -> Result<&[f32]> {
        let (s, d) = self.get(name).ok_or_else(|| Error::MissingLayer(name.into()))?;
        if s != shape {
            return Err(Error::WeightContainer(format!(
                "layer `{name}` has shape {s:?}, expected {shape:?}"
            )));
        }
        Ok(d)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut blob: Vec<u8> = Vec::new();
        let mut manifest = Manifest { entries: Vec::new() };
        for (name, shape, data) in &self.entries {
            let offset = blob.len() as u64;
            for v in data {
                blob.extend_from_slice(&v.to_le_bytes());
            }
            manifest.entries.push(ManifestEntry {
                name: name.clone(),
                shape: shape.clone(),
                dtype: "f32".into(),
                offset,
                length: (data.len() * 4) as u64,
            });
        }
        let manifest_path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::json(&manifest_path, e))?;
        std::fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;
        let bin_path = dir.join("weights.bin");
        std::fs::write(&bin_path, blob).map_err(|e| Error::io(&bin_path, e))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join("manifest.json");
        let text =
            std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::json(&manifest_path, e))?;
        let bin_path = dir.join("weights.bin");
        let blob = std::fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
        let mut out = WeightContainer::new();
        for e in &manifest.entries {
            if e.dtype != "f32" {
                return Err(Error::WeightContainer(format!(
                    "layer `{}` has dtype `{}`, only f32 is supported",
                    e.name, e.dtype
                )));
            }
            let count = e.shape.iter().product::<usize>();
            if e.length as usize != count * 4 {
                return Err(Error::WeightContainer(format!(
                    "layer `{}` length {} does not match shape {:?}",
                    e.name, e.length, e.shape
                )));
            }
            let start = e.offset as usize;
            let end = start + e.length as usize;
            if end > blob.len() {
                return Err(Error::WeightContainer(format!(
                    "layer `{}` extends past the end of weights.bin ({} > {})",
                    e.name,
                    end,
                    blob.len()
                )));
            }
            let data = blob[start..end]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            out.push(e.name.clone(), e.shape.clone(), data);
        }
        Ok(out)
    }
}

fn kaiming_uniform(rng: &mut ChaCha8Rng, fan_in: usize, n: usize) -> Vec<f32> {
    let bound = (6.0 / fan_in as f32).sqrt();
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

fn conv3x3_random(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize) -> Conv3x3 {
    Conv3x3 {
        in_ch,
        out_ch,
        weight: kaiming_uniform(rng, in_ch * 9, out_ch * in_ch * 9),
        bias: vec![0.0; out_ch],
    }
}

/// Encoder width preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderVariant {
    /// Standard widths through the fourth block (64/128/256/512).
    Vgg19,
    /// Half widths, same topology; self-contained seeded weights.
    Tiny,
}

impl EncoderVariant {
    /// Channel counts at the four taps.
    pub fn tap_channels(self) -> [usize; 4] {
        match self {
            EncoderVariant::Vgg19 => [64, 128, 256, 512],
            EncoderVariant::Tiny => [32, 64, 128, 256],
        }
    }

    /// (in, out) channels of the nine encoder convolutions.
    pub fn encoder_channels(self) -> [(usize, usize); 9] {
        let [c1, c2, c3, c4] = self.tap_channels();
        [
            (3, c1),
            (c1, c1),
            (c1, c2),
            (c2, c2),
            (c2, c3),
            (c3, c3),
            (c3, c3),
            (c3, c3),
            (c3, c4),
        ]
    }

    /// (in, out) channels of the nine mirror-decoder convolutions.
    pub fn decoder_channels(self) -> [(usize, usize); 9] {
        let [c1, c2, c3, c4] = self.tap_channels();
        [
            (c4, c3),
            (c3, c3),
            (c3, c3),
            (c3, c3),
            (c3, c2),
            (c2, c2),
            (c2, c1),
            (c1, c1),
            (c1, 3),
        ]
    }
}

pub const ENCODER_LAYER_NAMES: [&str; 9] = [
    "conv1_1", "conv1_2", "conv2_1", "conv2_2", "conv3_1", "conv3_2", "conv3_3", "conv3_4",
    "conv4_1",
];

const DECODER_LAYER_NAMES: [&str; 9] = [
    "dec1", "dec2", "dec3", "dec4", "dec5", "dec6", "dec7", "dec8", "dec9",
];

/// Seed of the frozen `tiny` encoder. Fixed so every build produces the
/// same network.
const TINY_ENCODER_SEED: u64 = 0x7a11_ad41;

/// Encoder convolution stack through the relu4_1 tap.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderWeights {
    pub variant: EncoderVariant,
    pub layers: Vec<Conv3x3>,
}

impl EncoderWeights {
    /// The frozen half-width encoder used when no pretrained weights are
    /// available.
    pub fn tiny() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(TINY_ENCODER_SEED);
        let layers = EncoderVariant::Tiny
            .encoder_channels()
            .iter()
            .map(|&(i, o)| conv3x3_random(&mut rng, i, o))
            .collect();
        Self {
            variant: EncoderVariant::Tiny,
            layers,
        }
    }

    pub fn to_container(&self) -> WeightContainer {
        let mut c = WeightContainer::new();
        for (conv, name) in self.layers.iter().zip(ENCODER_LAYER_NAMES) {
            c.push(
                format!("{name}.weight"),
                vec![conv.out_ch, conv.in_ch, 3, 3],
                conv.weight.clone(),
            );
            c.push(format!("{name}.bias"), vec![conv.out_ch], conv.bias.clone());
        }
        c
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(dir)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let c = WeightContainer::load(dir)?;
        // Variant is recoverable from the first conv's output width.
        let (shape, _) = c
            .get("conv1_1.weight")
            .ok_or_else(|| Error::MissingLayer("conv1_1.weight".into()))?;
        let variant = match shape.first() {
            Some(64) => EncoderVariant::Vgg19,
            Some(32) => EncoderVariant::Tiny,
            other => {
                return Err(Error::WeightContainer(format!(
                    "unrecognized conv1_1 width {other:?}"
                )))
            }
        };
        let mut layers = Vec::with_capacity(9);
        for (&(i, o), name) in variant.encoder_channels().iter().zip(ENCODER_LAYER_NAMES) {
            let w = c.require(&format!("{name}.weight"), &[o, i, 3, 3])?;
            let b = c.require(&format!("{name}.bias"), &[o])?;
            layers.push(Conv3x3 {
                in_ch: i,
                out_ch: o,
                weight: w.to_vec(),
                bias: b.to_vec(),
            });
        }
        Ok(Self { variant, layers })
    }

    pub fn relu4_channels(&self) -> usize {
        self.variant.tap_channels()[3]
    }
}

/// Default LeakyReLU negative slope for the decoder.
pub const LEAKY_SLOPE: f32 = 0.01;

/// Mirror decoder: nine convolutions with ×2 nearest-neighbour upsampling
/// at the mirror positions of the encoder poolings.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderWeights {
    pub variant: EncoderVariant,
    pub negative_slope: f32,
    pub layers: Vec<Conv3x3>,
}

impl DecoderWeights {
    pub fn random(variant: EncoderVariant, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = variant
            .decoder_channels()
            .iter()
            .map(|&(i, o)| conv3x3_random(&mut rng, i, o))
            .collect();
        Self {
            variant,
            negative_slope: LEAKY_SLOPE,
            layers,
        }
    }

    pub fn append_to_container(&self, c: &mut WeightContainer) {
        for (conv, name) in self.layers.iter().zip(DECODER_LAYER_NAMES) {
            c.push(
                format!("{name}.weight"),
                vec![conv.out_ch, conv.in_ch, 3, 3],
                conv.weight.clone(),
            );
            c.push(format!("{name}.bias"), vec![conv.out_ch], conv.bias.clone());
        }
        c.push("negative_slope", vec![1], vec![self.negative_slope]);
    }

    pub fn from_container(c: &WeightContainer, variant: EncoderVariant) -> Result<Self> {
        let mut layers = Vec::with_capacity(9);
        for (&(i, o), name) in variant.decoder_channels().iter().zip(DECODER_LAYER_NAMES) {
            let w = c.require(&format!("{name}.weight"), &[o, i, 3, 3])?;
            let b = c.require(&format!("{name}.bias"), &[o])?;
            layers.push(Conv3x3 {
                in_ch: i,
                out_ch: o,
                weight: w.to_vec(),
                bias: b.to_vec(),
            });
        }
        let negative_slope = c.require("negative_slope", &[1])?[0];
        Ok(Self {
            variant,
            negative_slope,
            layers,
        })
    }

    pub fn input_channels(&self) -> usize {
        self.layers[0].in_ch
    }
}

/// Default channel-attention reduction ratio.
pub const CBAM_REDUCTION: usize = 16;

/// Channel + spatial attention weights: a two-layer bottleneck MLP shared by
/// the average- and max-pooled descriptors, and a 7×7 conv over the
/// channel-mean/channel-max maps.
#[derive(Debug, Clone, PartialEq)]
pub struct CbamWeights {
    pub channels: usize,
    pub hidden: usize,
    /// `[hidden][channels]`
    pub mlp_w1: Vec<f32>,
    /// `[channels][hidden]`
    pub mlp_w2: Vec<f32>,
    pub spatial: ConvKxK,
}

impl CbamWeights {
    pub fn random(channels: usize, seed: u64) -> Self {
        let hidden = (channels / CBAM_REDUCTION).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mlp_w1 = kaiming_uniform(&mut rng, channels, hidden * channels);
        let mlp_w2 = kaiming_uniform(&mut rng, hidden, channels * hidden);
        let mut spatial = ConvKxK::zeros(2, 1, 7);
        spatial.weight = kaiming_uniform(&mut rng, 2 * 49, 98);
        Self {
            channels,
            hidden,
            mlp_w1,
            mlp_w2,
            spatial,
        }
    }

    pub fn append_to_container(&self, c: &mut WeightContainer) {
        c.push(
            "cbam.mlp1.weight",
            vec![self.hidden, self.channels],
            self.mlp_w1.clone(),
        );
        c.push(
            "cbam.mlp2.weight",
            vec![self.channels, self.hidden],
            self.mlp_w2.clone(),
        );
        c.push(
            "cbam.spatial.weight",
            vec![1, 2, 7, 7],
            self.spatial.weight.clone(),
        );
        c.push("cbam.spatial.bias", vec![1], self.spatial.bias.clone());
    }

    pub fn from_container(c: &WeightContainer, channels: usize) -> Result<Self> {
        let hidden = (channels / CBAM_REDUCTION).max(1);
        let mlp_w1 = c.require("cbam.mlp1.weight", &[hidden, channels])?.to_vec();
        let mlp_w2 = c.require("cbam.mlp2.weight", &[channels, hidden])?.to_vec();
        let sw = c.require("cbam.spatial.weight", &[1, 2, 7, 7])?.to_vec();
        let sb = c.require("cbam.spatial.bias", &[1])?.to_vec();
        Ok(Self {
            channels,
            hidden,
            mlp_w1,
            mlp_w2,
            spatial: ConvKxK {
                in_ch: 2,
                out_ch: 1,
                k: 7,
                weight: sw,
                bias: sb,
            },
        })
    }
}
