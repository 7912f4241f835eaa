//! Decoder + attention training loop. The encoder stays frozen; gradients
//! flow through it into the decoder and attention parameters, which are
//! updated with Adam under a 1/(1+decay·t) learning-rate schedule.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::edge::scharr_edges;
use crate::error::{Error, Result};
use crate::image::{random_crop, Image};
use crate::losses::{
    content_loss_grad, edge_loss_grad, style_loss_from_stats, total_loss, LossReport, LossWeights,
};
use crate::stylenet::adain::{adain_backward_content, adain_traced};
use crate::stylenet::cbam::{cbam_backward, cbam_traced, CbamGrads};
use crate::stylenet::decoder::{decode_traced, decoder_backward, DecoderGrads};
use crate::stylenet::encoder::{encode_taps_plain, encode_taps_traced, encoder_backward_to_input};
use crate::stylenet::weights::{
    CbamWeights, DecoderWeights, EncoderVariant, EncoderWeights, WeightContainer,
};
use crate::tensor::{tensor_stats, FeatureMap, Tap, Tensor, STATS_EPS};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: u64,
    pub learning_rate: f64,
    /// Multiplicative-inverse decay: lr_t = lr / (1 + lr_decay·t).
    pub lr_decay: f64,
    pub crop: usize,
    pub batch: usize,
    pub weights: LossWeights,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub encoder_variant: EncoderVariant,
    pub edge_weight: f32,
    /// Container directory for pretrained encoder weights (vgg19 variant).
    pub encoder_weights: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            learning_rate: 1e-4,
            lr_decay: 5e-5,
            crop: 256,
            batch: 1,
            weights: LossWeights::default(),
            seed: 0,
            checkpoint_every: 1000,
            encoder_variant: EncoderVariant::Tiny,
            edge_weight: 1.0,
            encoder_weights: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.crop < 8 || self.crop % 8 != 0 {
            return Err(Error::InvalidConfig(format!(
                "crop must be a positive multiple of 8, got {}",
                self.crop
            )));
        }
        if self.batch < 1 {
            return Err(Error::InvalidConfig("batch must be >= 1".into()));
        }
        self.weights.validate()
    }

    pub fn lr_at(&self, t: u64) -> f64 {
        self.learning_rate / (1.0 + self.lr_decay * t as f64)
    }
}

/// Serializable generator state, enough to reconstruct the stream exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: Vec<u8>,
    pub word_pos: String,
    pub stream: u64,
}

impl RngState {
    fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed().to_vec(),
            word_pos: rng.get_word_pos().to_string(),
            stream: rng.get_stream(),
        }
    }
}

/// Trained decoder + attention weights plus the run metadata needed to
/// reproduce or resume the run.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub decoder: DecoderWeights,
    pub cbam: CbamWeights,
    pub config: TrainConfig,
    pub iteration: u64,
    pub rng: RngState,
}

#[derive(Serialize, Deserialize)]
struct TrainState {
    config: TrainConfig,
    iteration: u64,
    rng: RngState,
}

pub fn save_checkpoint(ckpt: &Checkpoint, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let mut container = WeightContainer::new();
    ckpt.decoder.append_to_container(&mut container);
    ckpt.cbam.append_to_container(&mut container);
    container.save(dir)?;
    let state = TrainState {
        config: ckpt.config.clone(),
        iteration: ckpt.iteration,
        rng: ckpt.rng.clone(),
    };
    let path = dir.join("train_state.json");
    let json = serde_json::to_string_pretty(&state).map_err(|e| Error::json(&path, e))?;
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<Checkpoint> {
    let dir = dir.as_ref();
    let path = dir.join("train_state.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let state: TrainState = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
    let container = WeightContainer::load(dir)?;
    let variant = state.config.encoder_variant;
    let decoder = DecoderWeights::from_container(&container, variant)?;
    let cbam = CbamWeights::from_container(&container, variant.tap_channels()[3])?;
    Ok(Checkpoint {
        decoder,
        cbam,
        config: state.config,
        iteration: state.iteration,
        rng: state.rng,
    })
}

/// Adam with bias correction; one slot pair per parameter tensor.
struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    fn new(sizes: &[usize]) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    fn step(&mut self, lr: f64, params: &mut [&mut [f32]], grads: &[&[f32]]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..p.len() {
                let gi = g[i] as f64;
                let mi = self.beta1 * m[i] as f64 + (1.0 - self.beta1) * gi;
                let vi = self.beta2 * v[i] as f64 + (1.0 - self.beta2) * gi * gi;
                m[i] = mi as f32;
                v[i] = vi as f32;
                let mhat = mi / bc1;
                let vhat = vi / bc2;
                p[i] = (p[i] as f64 - lr * mhat / (vhat.sqrt() + self.eps)) as f32;
            }
        }
    }
}

/// PNG files in `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = rd
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("png"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyDirectory(dir.to_path_buf()));
    }
    Ok(files)
}

/// Upscales so the shorter side reaches `crop` (bilinear); larger images
/// pass through.
fn ensure_croppable(img: Image, crop: usize) -> Image {
    let shorter = img.height().min(img.width());
    if shorter >= crop {
        return img;
    }
    let scale = crop as f32 / shorter as f32;
    let nh = ((img.height() as f32 * scale).round() as usize).max(crop);
    let nw = ((img.width() as f32 * scale).round() as usize).max(crop);
    img.resize_bilinear(nh, nw)
}

struct SampleGrads {
    lc: f64,
    ls: f64,
    le: f64,
    dec: DecoderGrads,
    cbam: CbamGrads,
}

/// One forward/backward pass on a (content, style) crop pair. Loss targets
/// (aligned content, style statistics, edge activations) are constants; the
/// gradient flows through the decoded image and the decoder input path.
fn forward_backward(
    encoder: &EncoderWeights,
    decoder: &DecoderWeights,
    cbam: &CbamWeights,
    content: &Image,
    style: &Image,
    edge_weight: f32,
    loss_weights: &LossWeights,
) -> Result<SampleGrads> {
    let content_t = Tensor::from_image(content);
    let style_t = Tensor::from_image(style);
    let edge_img = scharr_edges(content).to_image().replicate_rgb();
    let edge_t = Tensor::from_image(&edge_img);

    // Frozen targets.
    let content_taps = encode_taps_plain(&content_t, encoder)?;
    let c4 = &content_taps[3];
    let style_taps = encode_taps_plain(&style_t, encoder)?;
    let style_stats = style_taps
        .iter()
        .map(|t| tensor_stats(t, STATS_EPS))
        .collect::<Result<Vec<_>>>()?;
    let edge_taps = encode_taps_plain(&edge_t, encoder)?;

    // Trainable path.
    let (refined, cbam_trace) = cbam_traced(c4, cbam)?;
    let (adacs, adain_trace) = adain_traced(&refined, &style_taps[3])?;
    let mut fused = adacs.clone();
    for (f, e) in fused.data_mut().iter_mut().zip(edge_taps[3].data()) {
        *f += edge_weight * e;
    }
    let (out_img, dec_trace) = decode_traced(&fused, decoder)?;
    let (out_taps, enc_trace) = encode_taps_traced(&out_img, encoder)?;

    let out_fms: Vec<FeatureMap> = out_taps
        .into_iter()
        .zip(Tap::ALL)
        .map(|(t, tap)| FeatureMap::new(t, tap))
        .collect();
    let edge_fms: Vec<FeatureMap> = edge_taps
        .into_iter()
        .zip(Tap::ALL)
        .map(|(t, tap)| FeatureMap::new(t, tap))
        .collect();
    let adacs_fm = FeatureMap::new(adacs, Tap::Relu4_1);

    let (lc, g_content) = content_loss_grad(&out_fms[3], &adacs_fm)?;
    let (ls, g_style) = style_loss_from_stats(&out_fms, &style_stats, STATS_EPS)?;
    let (le, g_edge) = edge_loss_grad(&out_fms, &edge_fms)?;

    // Combine per-tap gradients with the loss weights.
    let mut d_taps: Vec<Tensor> = g_style
        .into_iter()
        .zip(g_edge)
        .map(|(s, e)| {
            let mut d = s;
            for (dv, ev) in d.data_mut().iter_mut().zip(e.data()) {
                *dv = (loss_weights.beta * *dv as f64 + loss_weights.gamma * *ev as f64) as f32;
            }
            d
        })
        .collect();
    for (dv, cv) in d_taps[3].data_mut().iter_mut().zip(g_content.data()) {
        *dv += (loss_weights.alpha * *cv as f64) as f32;
    }

    let d_out_img = encoder_backward_to_input(
        encoder,
        &enc_trace,
        &[Some(&d_taps[0]), Some(&d_taps[1]), Some(&d_taps[2]), Some(&d_taps[3])],
    );
    let (dec_grads, d_fused) = decoder_backward(decoder, &dec_trace, &d_out_img);
    // Fusion is additive, so the aligned-content branch gets d_fused as is.
    let d_refined = adain_backward_content(&refined, &adain_trace, &d_fused);
    let (cbam_grads, _) = cbam_backward(c4, cbam, &cbam_trace, &d_refined);

    Ok(SampleGrads {
        lc,
        ls,
        le,
        dec: dec_grads,
        cbam: cbam_grads,
    })
}

/// Trains decoder and attention weights on (content, style) directories.
/// Writes `train_log.csv` and periodic checkpoints under `out_dir`; the
/// final checkpoint lands in `out_dir` itself.
pub fn train(content_dir: &Path, style_dir: &Path, cfg: &TrainConfig, out_dir: &Path) -> Result<Checkpoint> {
    let encoder = match cfg.encoder_variant {
        EncoderVariant::Tiny => EncoderWeights::tiny(),
        EncoderVariant::Vgg19 => {
            let path = cfg.encoder_weights.as_ref().ok_or_else(|| {
                Error::InvalidConfig(
                    "encoder_variant vgg19 requires encoder_weights to point at a weight container"
                        .into(),
                )
            })?;
            EncoderWeights::load(path)?
        }
    };
    train_with_encoder(&encoder, content_dir, style_dir, cfg, out_dir)
}

/// Training core with a caller-supplied (frozen) encoder.
pub fn train_with_encoder(
    encoder: &EncoderWeights,
    content_dir: &Path,
    style_dir: &Path,
    cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<Checkpoint> {
    cfg.validate()?;
    if encoder.variant != cfg.encoder_variant {
        return Err(Error::InvalidConfig(format!(
            "encoder variant {:?} does not match config {:?}",
            encoder.variant, cfg.encoder_variant
        )));
    }
    let content_files = list_images(content_dir)?;
    let style_files = list_images(style_dir)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut decoder = DecoderWeights::random(cfg.encoder_variant, cfg.seed);
    let mut cbam = CbamWeights::random(cfg.encoder_variant.tap_channels()[3], cfg.seed.wrapping_add(1));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut sizes: Vec<usize> = Vec::new();
    for l in &decoder.layers {
        sizes.push(l.weight.len());
        sizes.push(l.bias.len());
    }
    sizes.extend([
        cbam.mlp_w1.len(),
        cbam.mlp_w2.len(),
        cbam.spatial.weight.len(),
        cbam.spatial.bias.len(),
    ]);
    let mut adam = Adam::new(&sizes);

    let log_path = out_dir.join("train_log.csv");
    let mut log = std::io::BufWriter::new(
        std::fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?,
    );
    writeln!(log, "iter,content,style,edge,total,lr").map_err(|e| Error::io(&log_path, e))?;

    let mut report = LossReport {
        content: 0.0,
        style: 0.0,
        edge: 0.0,
        total: 0.0,
    };
    for t in 0..cfg.iterations {
        let mut acc: Option<SampleGrads> = None;
        for _ in 0..cfg.batch {
            let ci = rng.random_range(0..content_files.len());
            let si = rng.random_range(0..style_files.len());
            let content = ensure_croppable(
                Image::load_png(&content_files[ci])?.replicate_rgb(),
                cfg.crop,
            );
            let style = ensure_croppable(
                Image::load_png(&style_files[si])?.replicate_rgb(),
                cfg.crop,
            );
            let cseed = rng.random::<u64>();
            let sseed = rng.random::<u64>();
            let content_crop = random_crop(&content, cfg.crop, cseed)?;
            let style_crop = random_crop(&style, cfg.crop, sseed)?;

            let sample = forward_backward(
                encoder,
                &decoder,
                &cbam,
                &content_crop,
                &style_crop,
                cfg.edge_weight,
                &cfg.weights,
            )?;
            acc = Some(match acc {
                None => sample,
                Some(mut a) => {
                    a.lc += sample.lc;
                    a.ls += sample.ls;
                    a.le += sample.le;
                    for (dst, src) in a.dec.dw.iter_mut().zip(&sample.dec.dw) {
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                    for (dst, src) in a.dec.db.iter_mut().zip(&sample.dec.db) {
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                    for (d, s) in a.cbam.dw1.iter_mut().zip(&sample.cbam.dw1) {
                        *d += s;
                    }
                    for (d, s) in a.cbam.dw2.iter_mut().zip(&sample.cbam.dw2) {
                        *d += s;
                    }
                    for (d, s) in a.cbam.dspatial_w.iter_mut().zip(&sample.cbam.dspatial_w) {
                        *d += s;
                    }
                    for (d, s) in a.cbam.dspatial_b.iter_mut().zip(&sample.cbam.dspatial_b) {
                        *d += s;
                    }
                    a
                }
            });
        }
        let mut acc = acc.expect("batch >= 1");
        let inv_b = 1.0 / cfg.batch as f64;
        acc.lc *= inv_b;
        acc.ls *= inv_b;
        acc.le *= inv_b;
        if cfg.batch > 1 {
            let s = inv_b as f32;
            for g in acc.dec.dw.iter_mut().chain(acc.dec.db.iter_mut()) {
                for v in g.iter_mut() {
                    *v *= s;
                }
            }
            for g in [
                &mut acc.cbam.dw1,
                &mut acc.cbam.dw2,
                &mut acc.cbam.dspatial_w,
                &mut acc.cbam.dspatial_b,
            ] {
                for v in g.iter_mut() {
                    *v *= s;
                }
            }
        }

        report = total_loss(acc.lc, acc.ls, acc.le, &cfg.weights).map_err(|e| match e {
            Error::NonFiniteLoss { term, .. } => Error::NonFiniteLoss { term, iteration: t },
            other => other,
        })?;

        let lr_t = cfg.lr_at(t);
        {
            let mut params: Vec<&mut [f32]> = Vec::new();
            let mut grads: Vec<&[f32]> = Vec::new();
            for (l, (dw, db)) in decoder
                .layers
                .iter_mut()
                .zip(acc.dec.dw.iter().zip(&acc.dec.db))
            {
                params.push(&mut l.weight);
                grads.push(dw);
                params.push(&mut l.bias);
                grads.push(db);
            }
            params.push(&mut cbam.mlp_w1);
            grads.push(&acc.cbam.dw1);
            params.push(&mut cbam.mlp_w2);
            grads.push(&acc.cbam.dw2);
            params.push(&mut cbam.spatial.weight);
            grads.push(&acc.cbam.dspatial_w);
            params.push(&mut cbam.spatial.bias);
            grads.push(&acc.cbam.dspatial_b);
            adam.step(lr_t, &mut params, &grads);
        }

        writeln!(
            log,
            "{},{},{},{},{},{}",
            t, report.content, report.style, report.edge, report.total, lr_t
        )
        .map_err(|e| Error::io(&log_path, e))?;

        let done = t + 1;
        if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < cfg.iterations {
            let ckpt = Checkpoint {
                decoder: decoder.clone(),
                cbam: cbam.clone(),
                config: cfg.clone(),
                iteration: done,
                rng: RngState::capture(&rng),
            };
            save_checkpoint(&ckpt, out_dir.join(format!("ckpt_{done:06}")))?;
        }
    }
    log.flush().map_err(|e| Error::io(&log_path, e))?;
    let _ = report;

    let ckpt = Checkpoint {
        decoder,
        cbam,
        config: cfg.clone(),
        iteration: cfg.iterations,
        rng: RngState::capture(&rng),
    };
    save_checkpoint(&ckpt, out_dir)?;
    Ok(ckpt)
}
