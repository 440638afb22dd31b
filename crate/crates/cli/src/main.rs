//! `skelshap`: generate data, train, explain, perturb, sweep and verify.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure. Failures print one JSON object to stderr.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use skelshap_core::{Error, Granularity, Result};

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "skelshap", version, about = "Shapley explanations for skeleton graph classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic data or import recorded splits into the run directory.
    Gen,
    /// Train the classifier on the generated splits.
    Train,
    /// Explain validation samples; writes attributions, beeswarm and local CSVs.
    Explain,
    /// Informed and random edge-importance perturbation at SHAP-ranked key points.
    Perturb,
    /// Scale-mode threshold sweep over the configured factors.
    Sweep,
    /// Run the self-check suite and the run-directory hash check.
    Verify,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Largest perturbation size k; 0 reports only the baseline.
    #[arg(long, visible_alias = "k", global = true)]
    k_max: Option<usize>,
    /// Scale factor for scale-mode perturbation.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Perturbation mode: mask or scale.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Player granularity: keypoint, group or keypoint_group.
    #[arg(long, global = true)]
    players: Option<String>,
    /// Background sample count.
    #[arg(long, global = true)]
    background: Option<usize>,
    /// Number of background chunks.
    #[arg(long, global = true)]
    chunks: Option<usize>,
    /// Run directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::TooManyPlayers { .. } => 2,
        Error::Numerical { .. } => 4,
        _ => 3,
    }
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Topology(_) => "topology",
        Error::Data(_) => "data",
        Error::Shape(_) => "shape",
        Error::Config(_) => "config",
        Error::Numerical { .. } => "numerical",
        Error::Corrupt { .. } => "corrupt",
        Error::HashMismatch { .. } => "hash_mismatch",
        Error::TooManyPlayers { .. } => "too_many_players",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
        Error::Csv(_) => "csv",
    }
}

fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var("SHAPGCN_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("SHAPGCN_THREADS={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<bool> {
    init_threads()?;
    let c = cli.common;
    let overrides = Overrides {
        seed: c.seed,
        k_max: c.k_max,
        epsilon: c.epsilon,
        mode: c.mode,
        players: c.players.as_deref().map(str::parse::<Granularity>).transpose()?,
        background: c.background,
        chunks: c.chunks,
        out: c.out,
    };
    let config = RunConfig::load(c.config.as_deref(), &overrides)?;
    let summary = match cli.command {
        Command::Gen => commands::gen(&config)?,
        Command::Train => commands::train(&config)?,
        Command::Explain => commands::explain(&config)?,
        Command::Perturb => commands::perturb(&config)?,
        Command::Sweep => commands::sweep(&config)?,
        Command::Verify => {
            let (passed, report) = commands::verify(&config)?;
            println!("{report}");
            return Ok(passed);
        }
    };
    println!("{summary}");
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            let err = serde_json::json!({ "error": "numerical", "message": "self-checks failed", "exit_code": 4 });
            eprintln!("{err}");
            ExitCode::from(4)
        }
        Err(e) => {
            let code = exit_code(&e);
            let err = serde_json::json!({ "error": kind(&e), "message": e.to_string(), "exit_code": code });
            eprintln!("{err}");
            ExitCode::from(code)
        }
    }
}
