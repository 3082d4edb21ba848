use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use robustkit::enhance::{self, Checkpoint, EnhanceConfig, TrainableEmbedder};
use robustkit::perturb::PerturbationKind;
use robustkit::{synthetic, PerturbationSpec, ToyEmbedder};
use serde::Serialize;

use crate::exit;
use crate::input;

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    /// Training images; every fourth image (sorted by name) is held out as
    /// the probe set unless --probe is given.
    #[arg(long, conflicts_with = "synthetic")]
    pub images: Option<PathBuf>,
    /// Probe images for the robustness history.
    #[arg(long)]
    pub probe: Option<PathBuf>,
    /// Use a synthetic corpus of this many 32x32 images instead of --images.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Contrast of the synthetic corpus.
    #[arg(long, default_value_t = 1.0)]
    pub contrast: f64,
    #[arg(long, default_value = "gaussian_noise")]
    pub perturbation: PerturbationKind,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Feature grid of the underlying toy embedder.
    #[arg(long, default_value_t = 4)]
    pub grid: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trained weights (JSON).
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Per-epoch history (CSV).
    #[arg(long)]
    pub history: PathBuf,
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    version: &'a str,
    command: &'a str,
    data: String,
    train_images: usize,
    probe_images: usize,
    perturbation: &'a PerturbationSpec,
    config: &'a EnhanceConfig,
    grid: usize,
    optimizer: &'a str,
    probe_plan: robustkit::SamplingPlan,
}

type Corpus = Vec<(String, robustkit::Image)>;

fn split_probe(all: Corpus) -> (Corpus, Corpus) {
    let mut train = Vec::new();
    let mut probe = Vec::new();
    for (i, item) in all.into_iter().enumerate() {
        if i % 4 == 3 {
            probe.push(item);
        } else {
            train.push(item);
        }
    }
    (train, probe)
}

fn load(dir: &std::path::Path) -> Result<Corpus> {
    let loaded = input::load_image_dir(dir)?;
    if !loaded.failures.is_empty() {
        input::report_failures(&loaded.failures);
        bail!("{} unreadable image(s) in {}", loaded.failures.len(), dir.display());
    }
    Ok(loaded.images)
}

pub fn run(args: EnhanceArgs) -> Result<i32> {
    if args.grid == 0 {
        bail!("--grid must be positive");
    }
    let cfg = EnhanceConfig {
        lambda: args.lambda,
        epochs: args.epochs,
        learning_rate: args.lr,
        batch_size: args.batch_size,
        seed: args.seed,
    };
    cfg.validate()?;
    let (data, all) = match (&args.images, args.synthetic) {
        (Some(dir), None) => (dir.display().to_string(), load(dir)?),
        (None, Some(n)) => (
            format!("synthetic:{n}:contrast{}", args.contrast),
            synthetic::corpus_with_contrast(n, 32, 32, args.seed, args.contrast),
        ),
        _ => bail!("give exactly one of --images or --synthetic"),
    };
    let (train, probe) = match &args.probe {
        Some(dir) => (all, load(dir)?),
        None => split_probe(all),
    };
    if train.is_empty() {
        bail!("no training images");
    }

    let spec = PerturbationSpec::new(args.perturbation);
    let base = TrainableEmbedder::identity(ToyEmbedder::new(args.grid));
    let (trained, history) = enhance::finetune(&base, &base, &train, &probe, &spec, &cfg)?;

    let checkpoint = Checkpoint::new(&trained, cfg, cfg.epochs);
    let mut json = serde_json::to_vec(&checkpoint)?;
    json.push(b'\n');
    input::write_file(&args.checkpoint, &json)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "l1", "l2", "total", "probe_rdr", "probe_cos"])?;
    for h in &history {
        w.write_record([
            h.epoch.to_string(),
            h.l1.to_string(),
            h.l2.to_string(),
            h.total.to_string(),
            h.probe_rdr.to_string(),
            h.probe_cos.to_string(),
        ])?;
    }
    input::write_file(&args.history, &w.into_inner().context("flushing csv")?)?;

    let meta = Meta {
        version: robustkit::VERSION,
        command: "enhance",
        data,
        train_images: train.len(),
        probe_images: probe.len(),
        perturbation: &spec,
        config: &cfg,
        grid: args.grid,
        optimizer: "gradient descent, seeded minibatches",
        probe_plan: enhance::probe_plan(),
    };
    let mut meta_json = serde_json::to_vec_pretty(&meta)?;
    meta_json.push(b'\n');
    input::write_file(&crate::meta_path(&args.checkpoint), &meta_json)?;

    if let (Some(first), Some(last)) = (history.first(), history.last()) {
        println!(
            "probe r_dr {:.6} -> {:.6}, probe cos(f, f') {:.6}",
            first.probe_rdr, last.probe_rdr, last.probe_cos
        );
    }
    Ok(exit::SUCCESS)
}
