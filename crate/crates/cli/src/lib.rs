//! Command-line wiring for the segmentation pipeline. Every subcommand is
//! a thin wrapper over the library: flags override config-file values which
//! override defaults, and partial outputs are removed on failure.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use edgeadain_core::edge::EdgeProviderConfig;
use edgeadain_core::stylenet::weights::EncoderVariant;
use edgeadain_core::trainer::{self, list_images, load_checkpoint, TrainConfig};
use edgeadain_core::{
    binarize, cleanup, compute_metrics, confusion, detect_edges, evaluate_batch, overlay,
    preprocess, stylize, BinaryMask, EncoderWeights, Image, PostConfig, PreprocessConfig,
    StyleWeights, StylizeConfig,
};

/// Env var consulted when `--weights` is not given.
pub const WEIGHTS_ENV: &str = "EDGEADAIN_WEIGHTS";

#[derive(Parser, Debug)]
#[command(
    name = "edgeadain",
    about = "Style-transfer based vessel segmentation pipeline",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Denoise and contrast-enhance an input image.
    Preprocess(PreprocessArgs),
    /// Produce an edge map with the configured provider.
    Edges(EdgesArgs),
    /// Run the style-transfer forward pass and save the stylized image.
    Stylize(StylizeArgs),
    /// Full pipeline: preprocess, edges, stylize, binarize, cleanup.
    Segment(SegmentArgs),
    /// Train decoder and attention weights on natural images.
    Train(TrainArgs),
    /// Score prediction masks against ground truth and emit reports.
    Eval(EvalArgs),
    /// Per-stage latency benchmark over an image directory.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EdgeProviderKind {
    Fallback,
    File,
}

/// JSON config file: a merged view of the per-module configs. Unknown keys
/// are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preprocess: PreprocessConfig,
    pub post: PostConfig,
    pub stylize: StylizeConfig,
    pub train: TrainConfig,
    pub weights: Option<PathBuf>,
    pub encoder_weights: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    fn from_flag(path: &Option<PathBuf>) -> anyhow::Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }
}

/// Tracks files written by a command so failures leave no partial outputs.
struct OutputGuard {
    written: Vec<PathBuf>,
    armed: bool,
}

impl OutputGuard {
    fn new() -> Self {
        Self {
            written: Vec::new(),
            armed: true,
        }
    }

    fn track(&mut self, path: &Path) {
        self.written.push(path.to_path_buf());
    }

    fn disarm(mut self) {
        self.armed = false;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.armed {
            for path in &self.written {
                let _ = std::fs::remove_file(path);
            }
        }
    }
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    /// Input image (PNG).
    #[arg(long)]
    pub input: PathBuf,
    /// Output image path.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EdgesArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Edge-map source.
    #[arg(long, value_enum, default_value = "fallback")]
    pub edge_provider: EdgeProviderKind,
    /// Precomputed edge map (required with `--edge-provider file`).
    #[arg(long)]
    pub edge_file: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StylizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Style image.
    #[arg(long)]
    pub style: PathBuf,
    /// Precomputed edge map for the content image; the classical fallback
    /// is used when absent.
    #[arg(long)]
    pub edge: Option<PathBuf>,
    /// Checkpoint directory (defaults to $EDGEADAIN_WEIGHTS).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Encoder weight container (vgg19 checkpoints).
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub edge_weight: Option<f32>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SegmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub style: PathBuf,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    /// Output mask path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "fallback")]
    pub edge_provider: EdgeProviderKind,
    #[arg(long)]
    pub edge_file: Option<PathBuf>,
    /// Compute the fallback edge map on the raw input instead of the
    /// preprocessed one.
    #[arg(long, default_value_t = false)]
    pub edge_on_raw: bool,
    /// Write a green-on-white overlay image (requires --gt).
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// Ground-truth mask; prints metrics when given.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub edge_weight: Option<f32>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Content image directory.
    #[arg(long)]
    pub input_dir: PathBuf,
    /// Style image directory.
    #[arg(long)]
    pub style: PathBuf,
    /// Checkpoint output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub crop: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub edge_weight: Option<f32>,
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Encoder variant: tiny (self-contained) or vgg19 (needs --encoder).
    #[arg(long)]
    pub encoder_variant: Option<String>,
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Prediction mask directory.
    #[arg(long)]
    pub input_dir: PathBuf,
    /// Ground-truth mask directory.
    #[arg(long)]
    pub gt: PathBuf,
    /// CSV report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Markdown report path.
    #[arg(long)]
    pub markdown: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub input_dir: PathBuf,
    #[arg(long)]
    pub style: PathBuf,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    /// Timed repetitions per image (after one untimed warm-up).
    #[arg(long, default_value_t = 3)]
    pub repeat: usize,
    /// CSV report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Edges(args) => cmd_edges(args),
        Command::Stylize(args) => cmd_stylize(args),
        Command::Segment(args) => cmd_segment(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn resolve_weights(flag: &Option<PathBuf>, cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p.clone());
    }
    if let Some(p) = &cfg.weights {
        return Ok(p.clone());
    }
    if let Ok(p) = std::env::var(WEIGHTS_ENV) {
        return Ok(PathBuf::from(p));
    }
    bail!("no weights path: pass --weights, set it in the config file, or export {WEIGHTS_ENV}")
}

/// Loads checkpoint + encoder, honoring the checkpoint's encoder variant.
fn load_style_weights(
    weights_dir: &Path,
    encoder_flag: &Option<PathBuf>,
    cfg: &RunConfig,
) -> anyhow::Result<StyleWeights> {
    let ckpt = load_checkpoint(weights_dir)
        .with_context(|| format!("loading checkpoint {}", weights_dir.display()))?;
    let encoder = match ckpt.config.encoder_variant {
        EncoderVariant::Tiny => EncoderWeights::tiny(),
        EncoderVariant::Vgg19 => {
            let path = encoder_flag
                .clone()
                .or_else(|| cfg.encoder_weights.clone())
                .or_else(|| ckpt.config.encoder_weights.clone())
                .context("checkpoint uses the vgg19 encoder: pass --encoder <container dir>")?;
            EncoderWeights::load(&path)
                .with_context(|| format!("loading encoder {}", path.display()))?
        }
    };
    Ok(StyleWeights {
        encoder,
        decoder: ckpt.decoder,
        cbam: ckpt.cbam,
    })
}

fn edge_provider(
    kind: EdgeProviderKind,
    edge_file: &Option<PathBuf>,
) -> anyhow::Result<EdgeProviderConfig> {
    match kind {
        EdgeProviderKind::Fallback => Ok(EdgeProviderConfig::Fallback),
        EdgeProviderKind::File => {
            let path = edge_file
                .clone()
                .context("--edge-provider file requires --edge-file <path>")?;
            Ok(EdgeProviderConfig::File(path))
        }
    }
}

fn cmd_preprocess(args: PreprocessArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::from_flag(&args.config)?;
    let img = Image::load_png(&args.input)?;
    let out = preprocess(&img, &cfg.preprocess)?;
    let mut guard = OutputGuard::new();
    guard.track(&args.out);
    out.save_png(&args.out)?;
    guard.disarm();
    Ok(())
}

fn cmd_edges(args: EdgesArgs) -> anyhow::Result<()> {
    let _cfg = RunConfig::from_flag(&args.config)?;
    let img = Image::load_png(&args.input)?;
    let provider = edge_provider(args.edge_provider, &args.edge_file)?;
    let edges = detect_edges(&img, &provider)?;
    let mut guard = OutputGuard::new();
    guard.track(&args.out);
    edges.save_png(&args.out)?;
    guard.disarm();
    Ok(())
}

fn cmd_stylize(args: StylizeArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::from_flag(&args.config)?;
    let weights_dir = resolve_weights(&args.weights, &cfg)?;
    let weights = load_style_weights(&weights_dir, &args.encoder, &cfg)?;
    let content = Image::load_png(&args.input)?;
    let style = Image::load_png(&args.style)?;
    let edge = match &args.edge {
        Some(path) => detect_edges(&content, &EdgeProviderConfig::File(path.clone()))?,
        None => detect_edges(&content, &EdgeProviderConfig::Fallback)?,
    };
    let mut style_cfg = cfg.stylize;
    if let Some(w) = args.edge_weight {
        style_cfg.edge_weight = w;
    }
    let out = stylize(&content, &style, &edge, &weights, &style_cfg)?;
    let mut guard = OutputGuard::new();
    guard.track(&args.out);
    out.clamp01().save_png(&args.out)?;
    guard.disarm();
    Ok(())
}

struct SegmentOutcome {
    mask: BinaryMask,
    stage_seconds: [f64; 4],
}

/// Shared pipeline body for `segment` and `bench`.
fn run_segment_pipeline(
    input: &Image,
    style: &Image,
    weights: &StyleWeights,
    pre_cfg: &PreprocessConfig,
    post_cfg: &PostConfig,
    style_cfg: &StylizeConfig,
    provider: &EdgeProviderConfig,
    edge_on_raw: bool,
) -> anyhow::Result<SegmentOutcome> {
    let t0 = Instant::now();
    let pre = preprocess(input, pre_cfg)?;
    let t1 = Instant::now();
    let edge_src = if edge_on_raw { input } else { &pre };
    let edge = detect_edges(edge_src, provider)?;
    let t2 = Instant::now();
    let stylized = stylize(&pre, style, &edge, weights, style_cfg)?;
    let t3 = Instant::now();
    let mask = cleanup(&binarize(&stylized, post_cfg)?, post_cfg);
    let t4 = Instant::now();
    Ok(SegmentOutcome {
        mask,
        stage_seconds: [
            (t1 - t0).as_secs_f64(),
            (t2 - t1).as_secs_f64(),
            (t3 - t2).as_secs_f64(),
            (t4 - t3).as_secs_f64(),
        ],
    })
}

fn cmd_segment(args: SegmentArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::from_flag(&args.config)?;
    if args.overlay.is_some() && args.gt.is_none() {
        bail!("--overlay requires --gt");
    }
    let weights_dir = resolve_weights(&args.weights, &cfg)?;
    let weights = load_style_weights(&weights_dir, &args.encoder, &cfg)?;
    let input = Image::load_png(&args.input)?;
    let style = Image::load_png(&args.style)?;
    let provider = edge_provider(args.edge_provider, &args.edge_file)?;
    let mut style_cfg = cfg.stylize;
    if let Some(w) = args.edge_weight {
        style_cfg.edge_weight = w;
    }

    let outcome = run_segment_pipeline(
        &input,
        &style,
        &weights,
        &cfg.preprocess,
        &cfg.post,
        &style_cfg,
        &provider,
        args.edge_on_raw,
    )?;

    let mut guard = OutputGuard::new();
    guard.track(&args.out);
    outcome.mask.save_png(&args.out)?;

    if let Some(gt_path) = &args.gt {
        let gt = BinaryMask::load_png(gt_path)?;
        let counts = confusion(&outcome.mask, &gt)?;
        let m = compute_metrics(&counts)?;
        println!(
            "accuracy {:.4}  sensitivity {:.4}  specificity {:.4}  precision {:.4}  dice {:.4}",
            m.accuracy, m.sensitivity, m.specificity, m.precision, m.dice
        );
        if let Some(overlay_path) = &args.overlay {
            let img = overlay(&outcome.mask, &gt)?;
            guard.track(overlay_path);
            img.save_png(overlay_path)?;
        }
    }
    guard.disarm();
    Ok(())
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::from_flag(&args.config)?;
    let mut tc: TrainConfig = cfg.train.clone();
    if let Some(v) = args.iters {
        tc.iterations = v;
    }
    if let Some(v) = args.lr {
        tc.learning_rate = v;
    }
    if let Some(v) = args.alpha {
        tc.weights.alpha = v;
    }
    if let Some(v) = args.beta {
        tc.weights.beta = v;
    }
    if let Some(v) = args.gamma {
        tc.weights.gamma = v;
    }
    if let Some(v) = args.crop {
        tc.crop = v;
    }
    if let Some(v) = args.seed {
        tc.seed = v;
    }
    if let Some(v) = args.edge_weight {
        tc.edge_weight = v;
    }
    if let Some(v) = args.checkpoint_every {
        tc.checkpoint_every = v;
    }
    if let Some(v) = &args.encoder_variant {
        tc.encoder_variant = match v.as_str() {
            "tiny" => EncoderVariant::Tiny,
            "vgg19" => EncoderVariant::Vgg19,
            other => bail!("unknown encoder variant `{other}` (expected tiny or vgg19)"),
        };
    }
    if args.encoder.is_some() {
        tc.encoder_weights = args.encoder.clone();
    } else if tc.encoder_weights.is_none() {
        tc.encoder_weights = cfg.encoder_weights.clone();
    }
    let ckpt = trainer::train(&args.input_dir, &args.style, &tc, &args.out)?;
    println!(
        "trained {} iterations; checkpoint written to {}",
        ckpt.iteration,
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<()> {
    let report = evaluate_batch(&args.input_dir, &args.gt)?;
    print!("{}", report.to_markdown());
    println!();
    print!("{}", report.summary_lines());
    let mut guard = OutputGuard::new();
    if let Some(path) = &args.report {
        guard.track(path);
        std::fs::write(path, report.to_csv())?;
    }
    if let Some(path) = &args.markdown {
        guard.track(path);
        std::fs::write(path, report.to_markdown())?;
    }
    guard.disarm();
    Ok(())
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn cmd_bench(args: BenchArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::from_flag(&args.config)?;
    if args.repeat == 0 {
        bail!("--repeat must be at least 1");
    }
    let weights_dir = resolve_weights(&args.weights, &cfg)?;
    let weights = load_style_weights(&weights_dir, &args.encoder, &cfg)?;
    let style = Image::load_png(&args.style)?;
    let files = list_images(&args.input_dir)?;

    const STAGES: [&str; 4] = ["preprocess", "edge", "stylize", "postprocess"];
    let mut csv = String::from("image");
    for s in STAGES.iter().chain(["total"].iter()) {
        csv.push_str(&format!(",{s}_mean,{s}_std"));
    }
    csv.push('\n');

    println!("Average execution time per image (seconds, mean \u{b1} std over {} runs)", args.repeat);
    println!(
        "{:<24} {:>16} {:>16} {:>16} {:>16} {:>16}",
        "image", "preprocess", "edge", "stylize", "postprocess", "total"
    );

    for file in &files {
        let input = Image::load_png(file)?;
        // Warm-up, untimed.
        run_segment_pipeline(
            &input,
            &style,
            &weights,
            &cfg.preprocess,
            &cfg.post,
            &cfg.stylize,
            &EdgeProviderConfig::Fallback,
            false,
        )?;
        let mut stage_samples: [Vec<f64>; 4] = Default::default();
        let mut totals = Vec::with_capacity(args.repeat);
        for _ in 0..args.repeat {
            let t0 = Instant::now();
            let outcome = run_segment_pipeline(
                &input,
                &style,
                &weights,
                &cfg.preprocess,
                &cfg.post,
                &cfg.stylize,
                &EdgeProviderConfig::Fallback,
                false,
            )?;
            totals.push(t0.elapsed().as_secs_f64());
            for (dst, s) in stage_samples.iter_mut().zip(outcome.stage_seconds) {
                dst.push(s);
            }
        }
        let name = file
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("?")
            .to_string();
        let stats: Vec<(f64, f64)> = stage_samples.iter().map(|v| mean_std(v)).collect();
        let (tm, ts) = mean_std(&totals);
        csv.push_str(&name);
        for (m, s) in stats.iter().chain([(tm, ts)].iter()) {
            csv.push_str(&format!(",{m},{s}"));
        }
        csv.push('\n');
        println!(
            "{:<24} {:>7.4}\u{b1}{:<7.4} {:>7.4}\u{b1}{:<7.4} {:>7.4}\u{b1}{:<7.4} {:>7.4}\u{b1}{:<7.4} {:>7.4}\u{b1}{:<7.4}",
            name,
            stats[0].0, stats[0].1,
            stats[1].0, stats[1].1,
            stats[2].0, stats[2].1,
            stats[3].0, stats[3].1,
            tm, ts,
        );
    }

    let mut guard = OutputGuard::new();
    if let Some(path) = &args.report {
        guard.track(path);
        std::fs::write(path, &csv)?;
    }
    guard.disarm();
    Ok(())
}
