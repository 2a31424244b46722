use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hjb_cli::run::{run, RunOptions};

/// Numerical experiments for the viscous HJB equation on a Hilbert space.
///
/// Exit codes: 0 all checks passed, 1 an assertion failed, 2 the config is
/// invalid, 3 a runtime error occurred.
#[derive(Parser)]
#[command(name = "hjblab", version)]
struct Cli {
    /// Experiment file (.toml or .json).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(short, long, default_value = "hjblab-out")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the stdout summary.
    #[arg(short, long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = run(&RunOptions {
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        quiet: cli.quiet,
    });
    ExitCode::from(status as u8)
}
