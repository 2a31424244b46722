//! Runs one config end to end: thread pool, experiment, manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::{self, Experiment, ExperimentConfig};
use crate::experiments::{self as ex, Outcome};
use crate::output::OutputDir;

/// Everything passed, some assertion failed, bad config, runtime failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    AssertionFailed = 1,
    ConfigError = 2,
    RuntimeError = 3,
}

pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub quiet: bool,
}

#[derive(Serialize)]
struct Versions {
    hjblab: &'static str,
    hjb_core: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    experiment: &'static str,
    config: &'a ExperimentConfig,
    versions: Versions,
    threads: usize,
    seed: u64,
    outputs: &'a [String],
    pass: bool,
    wall_time_seconds: f64,
}

/// `HJB_THREADS` wins over the config value; one thread otherwise unset.
fn thread_count(cfg: &ExperimentConfig) -> Result<usize, String> {
    match std::env::var("HJB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("HJB_THREADS: expected a positive integer, found `{v}`")),
        },
        Err(_) => Ok(cfg.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))),
    }
}

fn dispatch(cfg: &ExperimentConfig, seed: u64, out: &mut OutputDir) -> anyhow::Result<Outcome> {
    match &cfg.experiment {
        Experiment::SpectrumCheck(c) => ex::spectrum_check(c, out),
        Experiment::Riccati(c) => ex::riccati(c, out),
        Experiment::LaxOleinik(c) => ex::lax_oleinik(c, seed, out),
        Experiment::SolveFd(c) => ex::solve_fd_run(c, seed, out),
        Experiment::Verify(c) => ex::verify_run(c, seed, out),
        Experiment::Converge(c) => ex::converge_run(c, out),
        Experiment::StorageSim(c) => ex::storage_run(c, seed, out),
    }
}

fn execute(cfg: &ExperimentConfig, threads: usize, seed: u64, out_dir: &Path) -> anyhow::Result<(Outcome, Vec<String>)> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let mut out = OutputDir::create(out_dir)?;
    let started = Instant::now();
    let outcome = pool.install(|| dispatch(cfg, seed, &mut out))?;
    let wall = started.elapsed().as_secs_f64();
    let mut files = out.files.clone();
    files.push("manifest.json".into());
    out.json(
        "manifest.json",
        &Manifest {
            schema_version: config::SCHEMA_VERSION,
            experiment: cfg.experiment.kind(),
            config: cfg,
            versions: Versions {
                hjblab: env!("CARGO_PKG_VERSION"),
                hjb_core: hjb_core::VERSION,
            },
            threads,
            seed,
            outputs: &files,
            pass: outcome.pass,
            wall_time_seconds: wall,
        },
    )?;
    Ok((outcome, files))
}

pub fn run(opts: &RunOptions) -> ExitStatus {
    let mut cfg = match config::load(&opts.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitStatus::ConfigError;
        }
    };
    if opts.seed.is_some() {
        cfg.seed = opts.seed;
    }
    if let Err(e) = config::validate(&cfg) {
        eprintln!("config error: {e}");
        return ExitStatus::ConfigError;
    }
    let threads = match thread_count(&cfg) {
        Ok(n) => n,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitStatus::ConfigError;
        }
    };
    let seed = cfg.seed.unwrap_or(0);
    cfg.seed = Some(seed);
    match execute(&cfg, threads, seed, &opts.out) {
        Ok((outcome, _)) => {
            if !opts.quiet {
                println!("{} (seed {seed}, {threads} thread(s))", cfg.experiment.kind());
                for line in &outcome.summary {
                    println!("  {line}");
                }
                println!("outputs in {}", opts.out.display());
            }
            if outcome.pass {
                ExitStatus::Pass
            } else {
                ExitStatus::AssertionFailed
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitStatus::RuntimeError
        }
    }
}
