//! `adaptsense`: run experiments, emit coherence tables, and validate the
//! closed-form results.

use std::path::PathBuf;
use std::process::ExitCode;

use adaptsense::harness::{self, validate, ExperimentConfig};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adaptsense", version, about = "Constrained adaptive sensing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Worker threads; 0 uses every available core.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write the coherence table, bounds and block-removal curve for dimension n.
    Coherence {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the acceptance suite; exits nonzero if any check fails.
    Validate {
        /// Comma-separated check ids (default: all eight).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        /// Skip the two long-running strategy comparisons (6 and 7).
        #[arg(long, conflicts_with = "only")]
        quick: bool,
    },
}

fn run(
    config: PathBuf,
    out: PathBuf,
    seed: Option<u64>,
    trials: Option<usize>,
    workers: Option<usize>,
) -> Result<()> {
    let mut cfg = ExperimentConfig::from_path(&config)?;
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = trials {
        cfg.trials = trials;
    }
    if workers.is_some() {
        cfg.workers = workers;
    }
    let report = harness::run(&cfg, &out).with_context(|| format!("running {}", config.display()))?;
    for row in &report.summary {
        println!("{:<28} n={:<5} m={:<5} median={:.4e}", row.strategy, row.n, row.m, row.median_sq_error);
    }
    for file in &report.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn coherence(n: usize, out: PathBuf) -> Result<()> {
    if !n.is_power_of_two() || n < 2 {
        bail!("--n must be a power of two ≥ 2, got {n}");
    }
    for file in harness::output::emit_coherence(&[n], &out, true)? {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn validate(only: Vec<u8>, quick: bool) -> Result<bool> {
    let ids: Vec<u8> = if !only.is_empty() {
        if let Some(bad) = only.iter().find(|&&id| !(1..=8).contains(&id)) {
            bail!("unknown check id {bad}; valid ids are 1 to 8");
        }
        only
    } else if quick {
        vec![1, 2, 3, 4, 5, 8]
    } else {
        (1..=8).collect()
    };
    let scratch = std::env::temp_dir().join(format!("adaptsense-validate-{}", std::process::id()));
    let reports = validate::run_criteria(&ids, &scratch);
    let _ = std::fs::remove_dir_all(&scratch);
    for r in &reports {
        println!("{}", r.line());
    }
    Ok(reports.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            trials,
            workers,
        } => run(config, out, seed, trials, workers).map(|_| true),
        Command::Coherence { n, out } => coherence(n, out).map(|_| true),
        Command::Validate { only, quick } => validate(only, quick),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

