use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use robustkit::embed::param_key;
use robustkit::metrics::{self, SamplingPlan};
use robustkit::perturb::{self, PerturbParam, PerturbationKind, PerturbationSpec};
use robustkit::{Embedder, Image, SamplingMode};
use serde::Serialize;

use crate::input::{self, EmbedderChoice, Threads};
use crate::{exit, Format, Sampling};

#[derive(Debug, Args)]
pub struct MeasureArgs {
    /// Directory of .png/.ppm/.pnm images.
    #[arg(long)]
    pub images: PathBuf,
    /// Report file.
    #[arg(long)]
    pub out: PathBuf,
    /// Perturbation id, a comma-separated list of ids, or `all`.
    #[arg(long, default_value = "all")]
    pub perturbation: String,
    /// Number of sampled parameters (the identity is added on top).
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, value_enum, default_value_t = Sampling::Equal)]
    pub sampling: Sampling,
    /// `toy` or `store:PATH`.
    #[arg(long, default_value = "toy")]
    pub embedder: EmbedderChoice,
    /// Leave the identity parameter out of the sampled set.
    #[arg(long)]
    pub no_identity: bool,
    /// Also write every perturbed image as PNG into this directory.
    #[arg(long)]
    pub dump_perturbed: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    pub format: Format,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn parse_perturbations(arg: &str) -> Result<Vec<PerturbationSpec>> {
    if arg == "all" {
        return Ok(PerturbationSpec::all());
    }
    let mut specs = Vec::new();
    for id in arg.split(',').map(str::trim) {
        let kind: PerturbationKind = id.parse().with_context(|| format!("--perturbation {id}"))?;
        if specs.iter().any(|s: &PerturbationSpec| s.kind == kind) {
            bail!("--perturbation lists `{id}` twice");
        }
        specs.push(PerturbationSpec::new(kind));
    }
    Ok(specs)
}

pub fn plan(sampling: Sampling, m: usize, seed: u64, no_identity: bool) -> Result<SamplingPlan> {
    let plan = SamplingPlan {
        mode: match sampling {
            Sampling::Equal => SamplingMode::EquallySpaced,
            Sampling::Random => SamplingMode::Random,
        },
        m,
        seed,
        include_identity: !no_identity,
    };
    plan.validate()?;
    Ok(plan)
}

#[derive(Debug, Serialize)]
struct Row<'a> {
    image_id: &'a str,
    perturbation: &'a str,
    sampling: &'a SamplingPlan,
    params: &'a [PerturbParam],
    r_cs: f64,
    r_ed: f64,
    r_dr: f64,
    embedder: &'a str,
    fixed_params: &'a BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    version: &'a str,
    command: &'a str,
    images: String,
    perturbations: Vec<&'a PerturbationSpec>,
    sampling: &'a SamplingPlan,
    embedder: String,
    format: &'a str,
    seed: u64,
    records: usize,
    failures: Vec<String>,
}

type ImageOutcome = Result<Vec<metrics::RobustnessRecord>, String>;

fn measure_image(
    id: &str,
    image: &Image,
    specs: &[PerturbationSpec],
    plan: &SamplingPlan,
    embedder: &dyn Embedder,
    seed: u64,
    dump: Option<&Path>,
) -> ImageOutcome {
    let mut records = Vec::with_capacity(specs.len());
    for spec in specs {
        let record = metrics::measure(id, image, spec, plan, embedder, seed).map_err(|e| format!("{}: {e}", spec.id()))?;
        if let Some(dir) = dump {
            for &k in &record.sampled_params {
                let out = perturb::apply(id, image, spec, k, seed).map_err(|e| e.to_string())?;
                let name = format!("{id}__{}__{}.png", spec.id(), param_key(k));
                out.save_png(dir.join(name)).map_err(|e| e.to_string())?;
            }
        }
        records.push(record);
    }
    Ok(records)
}

fn csv_row(row: &Row<'_>) -> Vec<String> {
    let params: Vec<String> = row.params.iter().map(|&k| param_key(k)).collect();
    let mut fixed = String::new();
    for (i, (k, v)) in row.fixed_params.iter().enumerate() {
        let _ = write!(fixed, "{}{k}={v}", if i > 0 { ";" } else { "" });
    }
    vec![
        row.image_id.to_string(),
        row.perturbation.to_string(),
        match row.sampling.mode {
            SamplingMode::EquallySpaced => "equal".into(),
            SamplingMode::Random => "random".into(),
        },
        row.sampling.m.to_string(),
        row.sampling.seed.to_string(),
        row.sampling.include_identity.to_string(),
        params.join(";"),
        row.r_cs.to_string(),
        row.r_ed.to_string(),
        row.r_dr.to_string(),
        row.embedder.to_string(),
        fixed,
    ]
}

const CSV_HEADER: [&str; 12] = [
    "image_id",
    "perturbation",
    "mode",
    "m",
    "seed",
    "include_identity",
    "params",
    "r_cs",
    "r_ed",
    "r_dr",
    "embedder",
    "fixed_params",
];

pub fn run(args: MeasureArgs, threads: Threads) -> Result<i32> {
    let specs = parse_perturbations(&args.perturbation)?;
    let plan = plan(args.sampling, args.m, args.seed, args.no_identity)?;
    let embedder = args.embedder.build()?;
    let loaded = input::load_image_dir(&args.images)?;
    if let Some(dir) = &args.dump_perturbed {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    let pool = threads.pool()?;
    let outcomes: Vec<ImageOutcome> = pool.install(|| {
        loaded
            .images
            .par_iter()
            .map(|(id, img)| {
                measure_image(id, img, &specs, &plan, embedder.as_ref(), args.seed, args.dump_perturbed.as_deref())
            })
            .collect()
    });

    let mut failures = loaded.failures.clone();
    let mut records = Vec::new();
    for ((id, _), outcome) in loaded.images.iter().zip(outcomes) {
        match outcome {
            Ok(r) => records.extend(r),
            Err(msg) => failures.push((id.clone(), msg)),
        }
    }

    let embedder_id = embedder.id();
    let fixed: BTreeMap<&str, &BTreeMap<String, f64>> = specs.iter().map(|s| (s.id(), &s.fixed_params)).collect();
    let rows = records.iter().map(|r| Row {
        image_id: &r.image_id,
        perturbation: &r.perturbation_id,
        sampling: &plan,
        params: &r.sampled_params,
        r_cs: r.r_cs,
        r_ed: r.r_ed,
        r_dr: r.r_dr,
        embedder: &embedder_id,
        fixed_params: fixed[r.perturbation_id.as_str()],
    });

    let body = match args.format {
        Format::Jsonl => {
            let mut out = Vec::new();
            for row in rows {
                serde_json::to_writer(&mut out, &row)?;
                out.push(b'\n');
            }
            out
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER)?;
            for row in rows {
                w.write_record(csv_row(&row))?;
            }
            w.into_inner().context("flushing csv")?
        }
    };
    input::write_file(&args.out, &body)?;

    let meta = Meta {
        version: robustkit::VERSION,
        command: "measure",
        images: args.images.display().to_string(),
        perturbations: specs.iter().collect(),
        sampling: &plan,
        embedder: embedder_id.clone(),
        format: match args.format {
            Format::Jsonl => "jsonl",
            Format::Csv => "csv",
        },
        seed: args.seed,
        records: records.len(),
        failures: failures.iter().map(|(n, m)| format!("{n}: {m}")).collect(),
    };
    let mut meta_json = serde_json::to_vec_pretty(&meta)?;
    meta_json.push(b'\n');
    input::write_file(&crate::meta_path(&args.out), &meta_json)?;

    input::report_failures(&failures);
    Ok(if failures.is_empty() { exit::SUCCESS } else { exit::USAGE_OR_IO })
}
