//! Command-line driver for robustkit.
//!
//! Every command is a pure function of its input files and flags, so
//! rerunning with the same arguments reproduces the outputs byte for byte.

mod enhance;
mod input;
mod measure;
mod predict;
mod sweep;
mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use input::{load_image_dir, EmbedderChoice, LoadedImages, Threads};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VERIFICATION_FAILED: i32 = 1;
    pub const USAGE_OR_IO: i32 = 2;
}

#[derive(Debug, Parser)]
#[command(name = "robustkit", version, about = "Embedding robustness under image perturbations")]
pub struct Cli {
    /// Worker threads (a number or `auto`); ROBUSTKIT_THREADS takes precedence.
    #[arg(long, global = true, default_value = "auto")]
    pub threads: Threads,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Robustness records for every image and perturbation.
    Measure(measure::MeasureArgs),
    /// Mean r_dr as a function of the number of sampled parameters.
    SweepM(sweep::SweepArgs),
    /// Linear prediction of performance from robustness.
    Predict(predict::PredictArgs),
    /// Robustness-aware fine-tuning of the linear toy embedder.
    Enhance(enhance::EnhanceArgs),
    /// Property table for the metrics and the enclosing-ball solver.
    Verify(verify::VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sampling {
    Equal,
    Random,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE_OR_IO } else { exit::SUCCESS };
        }
    };
    let threads = match cli.threads.resolve_with_env() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e:#}");
            return exit::USAGE_OR_IO;
        }
    };
    let result = match cli.command {
        Command::Measure(args) => measure::run(args, threads),
        Command::SweepM(args) => sweep::run(args, threads),
        Command::Predict(args) => predict::run(args),
        Command::Enhance(args) => enhance::run(args),
        Command::Verify(args) => verify::run(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit::USAGE_OR_IO
        }
    }
}

/// `<out>.meta.json`
pub fn meta_path(out: &std::path::Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}
