//! `drwr`: generate synthetic silhouette scenes, fit point clouds to them,
//! evaluate and run ablation sweeps.

mod ablate;
mod data;
mod eval;
mod fit;
mod gen;
mod manifest;
mod smooth;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit status for input or validation problems.
const EXIT_INPUT: u8 = 2;
/// Exit status for a run that hit a non-finite loss.
const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "drwr", version, about = "Silhouette-driven point cloud fitting")]
struct Cli {
    /// Seed for initialization and ground-truth sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Independent fits to run in parallel (ablate).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Print the resolved configuration and exit without writing anything.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render silhouettes, cameras and ground truth from a scene file.
    Gen(gen::Args),
    /// Write the smooth silhouette field of a mask.
    Smooth(smooth::Args),
    /// Fit a point cloud to the silhouettes in a data directory.
    Fit(fit::Args),
    /// Compare a fitted cloud with ground truth.
    Eval(eval::Args),
    /// Run the ablation table on a generated scene.
    Ablate(ablate::Args),
}

pub struct Globals {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub dry_run: bool,
}

impl Globals {
    pub fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("DRWR_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| anyhow::anyhow!("DRWR_THREADS must be a positive integer, got {raw:?}"))?;
        if n == 0 {
            anyhow::bail!("DRWR_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<drwr::Error>() {
        Some(drwr::Error::NonFiniteLoss { .. }) => EXIT_NUMERIC,
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let globals = Globals {
        seed: cli.seed,
        out: cli.out,
        jobs: cli.jobs.max(1),
        dry_run: cli.dry_run,
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Gen(a) => gen::run(&globals, a),
        Command::Smooth(a) => smooth::run(&globals, a),
        Command::Fit(a) => fit::run(&globals, a),
        Command::Eval(a) => eval::run(&globals, a),
        Command::Ablate(a) => ablate::run(&globals, a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
