//! `membrane-lab`: configuration-driven experiment runner.
//!
//! Every subcommand reads one JSON config, runs the corresponding pipeline,
//! and writes CSV outputs plus a manifest into the output directory.
//! Exit codes: 0 success, 2 flagged-but-complete, 1 error.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "membrane-lab", version, about = "Lattice laboratory for the bending-energy interface model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact operator identity audit.
    Greens(CommonArgs),
    /// Harmonic projection identity audit.
    Bergman(CommonArgs),
    /// Special-profile orthogonality residuals.
    Profile(CommonArgs),
    /// Discrete-vs-continuum bi-Laplacian comparison.
    Continuum(CommonArgs),
    /// Draw and persist a sample batch with diagnostics.
    Sample(CommonArgs),
    /// Thermodynamic-integration c.g.f. estimate.
    Cgf(CommonArgs),
    /// Infinite-volume comparison (d >= 5).
    #[command(name = "infinite-volume")]
    InfiniteVolume(CommonArgs),
    /// Gaussian-approximation comparison of the rescaled field.
    #[command(name = "gaussian-approx")]
    GaussianApprox(CommonArgs),
    /// Two-point scaling-limit covariance check.
    #[command(name = "scaling-limit")]
    ScalingLimit(CommonArgs),
    /// Single-spin marginal law check.
    Marginal(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Greens(_) => "greens",
            Command::Bergman(_) => "bergman",
            Command::Profile(_) => "profile",
            Command::Continuum(_) => "continuum",
            Command::Sample(_) => "sample",
            Command::Cgf(_) => "cgf",
            Command::InfiniteVolume(_) => "infinite-volume",
            Command::GaussianApprox(_) => "gaussian-approx",
            Command::ScalingLimit(_) => "scaling-limit",
            Command::Marginal(_) => "marginal",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Greens(a)
            | Command::Bergman(a)
            | Command::Profile(a)
            | Command::Continuum(a)
            | Command::Sample(a)
            | Command::Cgf(a)
            | Command::InfiniteVolume(a)
            | Command::GaussianApprox(a)
            | Command::ScalingLimit(a)
            | Command::Marginal(a) => a,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let args = cli.command.args();
    match run_command(name, args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run_command(name: &str, args: &CommonArgs) -> membrane_core::Result<i32> {
    let started = Instant::now();
    let text = std::fs::read_to_string(&args.config)?;
    let cfg = ExperimentConfig::parse(&text)?;
    if cfg.subcommand != name {
        return Err(membrane_core::Error::Parameter(format!(
            "config is for subcommand {:?} but {name:?} was invoked",
            cfg.subcommand
        )));
    }
    // Validate the cheap parts before any computation or output.
    cfg.potential()?;
    cfg.ls()?;
    let seed = args.seed.unwrap_or(cfg.seed);
    cfg.sampler_config(seed)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let outcome = run::execute(&cfg, seed)?;
    run::write_outputs(&cfg, seed, &out_dir, &outcome, started)
}
