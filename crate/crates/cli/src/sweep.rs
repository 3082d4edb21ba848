use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use robustkit::metrics;

use crate::input::{self, EmbedderChoice, Threads};
use crate::measure::{parse_perturbations, plan};
use crate::{exit, Sampling};

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub images: PathBuf,
    /// CSV with columns m,mode,mean_rdr.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "all")]
    pub perturbation: String,
    /// Comma-separated list of m values.
    #[arg(long, value_delimiter = ',', default_value = "2,3,5,10,20,50")]
    pub ms: Vec<usize>,
    #[arg(long, default_value = "toy")]
    pub embedder: EmbedderChoice,
    #[arg(long)]
    pub no_identity: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: SweepArgs, threads: Threads) -> Result<i32> {
    if args.ms.is_empty() || args.ms.contains(&0) {
        bail!("--ms must list positive integers");
    }
    let specs = parse_perturbations(&args.perturbation)?;
    let embedder = args.embedder.build()?;
    let loaded = input::load_image_dir(&args.images)?;
    if loaded.images.is_empty() {
        input::report_failures(&loaded.failures);
        bail!("no readable images in {}", args.images.display());
    }
    let pool = threads.pool()?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["m", "mode", "mean_rdr"])?;
    let mut failures = loaded.failures.clone();
    for &m in &args.ms {
        for (sampling, label) in [(Sampling::Equal, "equal"), (Sampling::Random, "random")] {
            let plan = plan(sampling, m, args.seed, args.no_identity)?;
            let (plan, embedder, seed) = (&plan, embedder.as_ref(), args.seed);
            let values: Vec<Result<f64, String>> = pool.install(|| {
                loaded
                    .images
                    .par_iter()
                    .flat_map_iter(|(id, img)| {
                        specs.iter().map(move |spec| {
                            metrics::measure(id, img, spec, plan, embedder, seed)
                                .map(|r| r.r_dr)
                                .map_err(|e| format!("{id} {}: {e}", spec.id()))
                        })
                    })
                    .collect()
            });
            let mut sum = 0.0;
            let mut n = 0usize;
            for v in values {
                match v {
                    Ok(r) => {
                        sum += r;
                        n += 1;
                    }
                    Err(msg) => failures.push((format!("m={m} {label}"), msg)),
                }
            }
            let mean = if n == 0 { f64::NAN } else { sum / n as f64 };
            w.write_record([m.to_string(), label.to_string(), mean.to_string()])?;
        }
    }
    let body = w.into_inner().context("flushing csv")?;
    input::write_file(&args.out, &body)?;
    input::report_failures(&failures);
    Ok(if failures.is_empty() { exit::SUCCESS } else { exit::USAGE_OR_IO })
}
