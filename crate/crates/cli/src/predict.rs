use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use robustkit::downstream::{self, DownstreamError, PredictionReport};
use serde::{Deserialize, Serialize};

use crate::exit;
use crate::input;

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// CSV with header `robustness,performance`.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Prediction report (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the four robustness-quartile group means (CSV) here.
    #[arg(long)]
    pub quartiles: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
struct PairRow {
    robustness: f64,
    performance: f64,
}

#[derive(Debug, Serialize)]
struct Output<'a> {
    version: &'a str,
    pairs: String,
    seed: u64,
    /// Set when every robustness value is equal and the mean was used.
    degenerate: bool,
    pearson: Option<f64>,
    report: PredictionReport,
}

pub fn read_pairs(path: &std::path::Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut pairs = Vec::new();
    for (line, row) in reader.deserialize::<PairRow>().enumerate() {
        let row = row.with_context(|| format!("{}: record {}", path.display(), line + 1))?;
        if !(row.robustness.is_finite() && row.performance.is_finite()) {
            bail!("{}: record {} has a non-finite value", path.display(), line + 1);
        }
        pairs.push((row.robustness, row.performance));
    }
    Ok(pairs)
}

pub fn run(args: PredictArgs) -> Result<i32> {
    let pairs = read_pairs(&args.pairs)?;
    let (report, degenerate) = match downstream::predict_report(&pairs, args.seed) {
        Ok(r) => (r, false),
        Err(DownstreamError::DegenerateFit { fallback }) => {
            eprintln!("warning: all robustness values are equal; predicting the mean");
            let (train, test) = downstream::split_halves(&pairs, args.seed);
            let report = PredictionReport {
                slope: fallback.slope,
                intercept: fallback.intercept,
                train_mse: fallback.mse(&train)?,
                test_mse: fallback.mse(&test)?,
                n_train: train.len(),
                n_test: test.len(),
                seed: args.seed,
            };
            (report, true)
        }
        Err(e) => return Err(e.into()),
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let output = Output {
        version: robustkit::VERSION,
        pairs: args.pairs.display().to_string(),
        seed: args.seed,
        degenerate,
        pearson: downstream::pearson(&xs, &ys).ok(),
        report,
    };
    let mut json = serde_json::to_vec_pretty(&output)?;
    json.push(b'\n');
    input::write_file(&args.out, &json)?;

    if let Some(path) = &args.quartiles {
        let groups = downstream::quartile_groups(&pairs)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["group", "size", "mean_robustness", "mean_performance"])?;
        for (i, g) in groups.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                g.size.to_string(),
                g.mean_robustness.to_string(),
                g.mean_performance.to_string(),
            ])?;
        }
        input::write_file(path, &w.into_inner().context("flushing csv")?)?;
    }
    Ok(exit::SUCCESS)
}
