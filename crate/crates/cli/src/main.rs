//! Command-line front end: distance sweeps, single-point diagnostics,
//! config validation, and Monte Carlo oracle checks.

mod config;
mod run;

use anyhow::Context;
use clap::{Parser, Subcommand};
use config::RunConfig;
use fprfi_core::pipeline::Candidate;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "fprfi",
    version,
    about = "Fully passive RFI QKD key-rate simulator"
)]
struct Cli {
    /// TOML run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the RNG seed of the optimizer.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the sweep (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Override the evaluation mode.
    #[arg(long, global = true, value_parser = ["asymptotic", "finite"])]
    mode: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the key transmission rate over a distance grid and write a
    /// plot-ready table plus a run manifest.
    Sweep {
        /// Output table path.
        #[arg(long, default_value = "sweep.tsv")]
        out: PathBuf,
        /// Checkpoint file for warm resume (read if present, updated after).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a single distance and print every intermediate quantity.
    Point {
        #[arg(long)]
        distance_km: f64,
        /// Fixed candidate as dtheta_z,dtheta_xy,dphi_xy,sigma (optimized when omitted).
        #[arg(long, value_delimiter = ',')]
        candidate: Option<Vec<f64>>,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate the configuration, printing the resolved values.
    ValidateConfig,
    /// Run the Monte Carlo validation suite against the quadrature pipeline.
    Oracle {
        /// Interference-sampler draws.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = cli.workers {
        cfg.workers = workers;
    }
    if let Some(mode) = &cli.mode {
        cfg.mode = mode.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Sweep { out, checkpoint } => {
            run::run_sweep(&cfg, out, checkpoint.as_ref())?;
            println!("wrote {}", out.display());
        }
        Command::Point {
            distance_km,
            candidate,
            out,
        } => {
            let cand = match candidate.as_ref() {
                Some(v) if v.len() == 4 => Some(Candidate {
                    dtheta_z: v[0],
                    dtheta_xy: v[1],
                    dphi_xy: v[2],
                    sigma: v[3],
                }),
                Some(v) => anyhow::bail!(
                    "--candidate needs 4 comma-separated values, got {}",
                    v.len()
                ),
                None => None,
            };
            let report = run::run_point(&cfg, *distance_km, cand)?;
            match out {
                Some(p) => {
                    std::fs::write(p, report).with_context(|| format!("writing {}", p.display()))?
                }
                None => println!("{report}"),
            }
        }
        Command::ValidateConfig => {
            println!("configuration valid");
            println!("{}", toml::to_string_pretty(&cfg)?);
        }
        Command::Oracle { samples } => {
            let (report, ok) = run::run_oracle(&cfg, *samples)?;
            print!("{report}");
            if !ok {
                std::process::exit(1);
            }
        }
    }
    Ok(())
}
