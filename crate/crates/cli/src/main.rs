//! `fiberlift`: run one experiment described by a TOML config.

mod config;
mod output;
mod pipelines;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "fiberlift", version, about = "Lift base measures and observables through skew-product fibers")]
struct Args {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory. Falls back to the config, then FIBERLIFT_OUT, then ./fiberlift-out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Overrides the config seed for pipelines that use one.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    verbose: bool,
}

fn run(args: &Args) -> Result<bool> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global().context("configuring threads")?;
    }
    let cfg = config::RunConfig::load(&args.config)?.with_seed(args.seed)?;
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .or_else(|| std::env::var_os("FIBERLIFT_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("fiberlift-out"));
    let ctx = pipelines::Ctx { verbose: args.verbose };
    let start = Instant::now();
    let outcome = pipelines::run(&cfg, &ctx)?;
    let timings = json!({
        "pipeline_seconds": start.elapsed().as_secs_f64(),
        "threads": rayon::current_num_threads(),
    });
    output::write_run(&dir, &cfg, &outcome, &timings)?;
    for a in &outcome.assertions {
        let tag = if a.pass { "ok" } else { "FAILED" };
        eprintln!("{tag:>6}  {}: {}", a.name, a.detail);
    }
    eprintln!("wrote {}", dir.join("envelope.json").display());
    Ok(outcome.pass())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
