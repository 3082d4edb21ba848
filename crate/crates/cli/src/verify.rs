use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use robustkit::metrics::{self, PropertyCheck};
use robustkit::{synthetic, PerturbationSpec};

use crate::exit;
use crate::input::{self, EmbedderChoice};

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Images to measure; a small synthetic corpus when omitted.
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long, default_value = "toy")]
    pub embedder: EmbedderChoice,
    /// Random instances for the enclosing-ball oracle comparison.
    #[arg(long, default_value_t = 500)]
    pub oracle_instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print the table as JSON.
    #[arg(long)]
    pub json: bool,
}

pub fn run(args: VerifyArgs) -> Result<i32> {
    let embedder = args.embedder.build()?;
    let images = match &args.images {
        Some(dir) => {
            let loaded = input::load_image_dir(dir)?;
            if !loaded.failures.is_empty() {
                input::report_failures(&loaded.failures);
                bail!("unreadable images in {}", dir.display());
            }
            loaded.images
        }
        None => synthetic::corpus(4, 32, 32, args.seed),
    };
    let specs = PerturbationSpec::all();
    let mut checks: Vec<PropertyCheck> = metrics::property_suite(embedder.as_ref(), &images, &specs, args.seed).checks;
    checks.extend(metrics::meb_oracle_check(args.oracle_instances, args.seed));

    if args.json {
        println!("{}", serde_json::to_string_pretty(&checks)?);
    } else {
        let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        println!("{:width$}  {:6}  {:>12}  {:>10}  {:>6}", "property", "result", "slack", "tolerance", "cases");
        for c in &checks {
            println!(
                "{:width$}  {:6}  {:>12.3e}  {:>10.1e}  {:>6}",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.slack,
                c.tolerance,
                c.cases
            );
        }
    }
    Ok(if checks.iter().all(|c| c.passed) { exit::SUCCESS } else { exit::VERIFICATION_FAILED })
}
