//! Batch experiment runner for the mixture-sieve estimation toolkit.
//!
//! `msieve <command> --config <path> [--seed N] [--out DIR]`
//!
//! All parameters live in one JSON config; the command name on the CLI must
//! match the config's `command` field (a guard against running the wrong
//! file). `--seed` and `--out` override the config. `MSIEVE_THREADS` caps the
//! worker pool. Exit codes: 0 success, 2 config error, 3 numeric failure,
//! 4 audit failure.

mod commands;
mod config;
mod manifest;

use clap::Parser;
use commands::CliError;
use config::{Command, ExperimentConfig};
use manifest::RunManifest;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "msieve", version, about = "Penalized Gaussian mixture sieve experiments")]
struct Cli {
    /// One of: select, cluster, rate, approx, lowerbound, audit.
    command: String,
    /// Path to the experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Override the root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_command(name: &str) -> Result<Command, CliError> {
    match name {
        "select" => Ok(Command::Select),
        "cluster" => Ok(Command::Cluster),
        "rate" => Ok(Command::Rate),
        "approx" => Ok(Command::Approx),
        "lowerbound" => Ok(Command::Lowerbound),
        "audit" => Ok(Command::Audit),
        other => Err(CliError::Config(format!(
            "unknown command '{other}' (expected select|cluster|rate|approx|lowerbound|audit)"
        ))),
    }
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("MSIEVE_THREADS") {
        let n: usize = threads
            .parse()
            .map_err(|_| CliError::Config(format!("MSIEVE_THREADS = '{threads}' is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let requested = parse_command(&cli.command)?;
    let (mut cfg, config_bytes) = ExperimentConfig::load(&cli.config)?;
    if cfg.command != requested {
        return Err(CliError::Config(format!(
            "config declares command '{}' but '{}' was requested",
            cfg.command, requested
        )));
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    let started = std::time::Instant::now();
    let mut manifest = RunManifest::new(&cfg.command.to_string(), &config_bytes, cfg.seed);
    if cli.seed.is_some() {
        manifest.note("seed_overridden", true);
    }
    let outcome = commands::dispatch(&cfg, &mut manifest);
    manifest
        .finish(&cfg.out_dir, started)
        .map_err(|e| CliError::Config(format!("manifest: {e}")))?;
    outcome
}

fn main() {
    match run() {
        Ok(()) => {}
        Err(e) => {
            let payload = serde_json::json!({
                "error": e.to_string(),
                "kind": e.kind(),
            });
            eprintln!("{payload}");
            std::process::exit(e.exit_code());
        }
    }
}
