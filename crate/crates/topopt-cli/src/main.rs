mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Topology optimization with coordinate networks and kernel analysis.
#[derive(Parser)]
#[command(name = "topopt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full optimization (network or filtered method) from a config.
    Optimize(CommonArgs),
    /// Export tangent-kernel Gram rows (empirical, limiting, or both).
    Ntk(CommonArgs),
    /// Export eigenvalues and eigenimages of the limiting kernel.
    Spectrum(CommonArgs),
    /// Sweep the half-maximum filter radius over hyperparameters.
    Radius(CommonArgs),
    /// Re-evaluate a trained checkpoint on a finer grid.
    Upsample(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the INI-style run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `out` key).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides the config's `seed` key).
    #[arg(long)]
    seed: Option<u64>,
}

type CommandFn = fn(&config::RunConfig) -> Result<(), commands::CmdError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&CommonArgs, CommandFn) = match &cli.command {
        Command::Optimize(a) => (a, commands::cmd_optimize),
        Command::Ntk(a) => (a, commands::cmd_ntk),
        Command::Spectrum(a) => (a, commands::cmd_spectrum),
        Command::Radius(a) => (a, commands::cmd_radius),
        Command::Upsample(a) => (a, commands::cmd_upsample),
    };
    let mut cfg = match config::RunConfig::from_file(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    match run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
