use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use gapflight::harness::{
    emit_trajectory_csv, load_trial_config, read_summary, recompute_stats, run_batch, BatchSpec, PlanSummary,
};
use gapflight::trial::{plan_trial, run_trial, TrialConfig};

#[derive(Parser)]
#[command(name = "gapflight", version, about = "Plan and simulate quadrotor flight through narrow inclined gaps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan the traverse and the approach for one trial and print them as JSON.
    Plan {
        /// Trial config (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the plan here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fly one closed-loop trial and write its report and time series.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for report.json and trajectory.csv.
        #[arg(long)]
        out: PathBuf,
        /// Keep every n-th time step in the CSV.
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Run a Monte-Carlo batch and print the summary statistics.
    Batch {
        /// Batch spec (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the statistics of a finished batch from its trial reports.
    Stats {
        #[arg(long)]
        dir: PathBuf,
        /// Fail unless the recomputed statistics equal the stored summary.
        #[arg(long)]
        check: bool,
    },
}

fn trial_config(path: Option<&Path>, seed: Option<u64>) -> Result<TrialConfig> {
    let mut cfg = match path {
        Some(p) => load_trial_config(p).with_context(|| format!("loading {}", p.display()))?,
        None => TrialConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Plan { config, seed, out } => {
            let cfg = trial_config(config.as_deref(), seed)?;
            let plan = plan_trial(&cfg).context("planning failed")?;
            let text = to_json(&PlanSummary::new(&cfg, &plan))?;
            match out {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Run {
            config,
            seed,
            out,
            stride,
        } => {
            let cfg = trial_config(config.as_deref(), seed)?;
            let report = run_trial(&cfg)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            fs::write(out.join("report.json"), to_json(&report)?)?;
            emit_trajectory_csv(&report, &out.join("trajectory.csv"), stride)?;
            let err = report.error_at_tc.map(|e| e.position_norm());
            println!(
                "seed {} success {} error_at_tc {} detections {} replans {}",
                report.seed,
                report.success,
                err.map_or("n/a".into(), |e| format!("{e:.4}")),
                report.detection_count,
                report.replan_count
            );
        }
        Command::Batch { config, seed, out } => {
            let mut spec = match &config {
                Some(p) => BatchSpec::load(p).with_context(|| format!("loading {}", p.display()))?,
                None => BatchSpec::default(),
            };
            if let Some(s) = seed {
                spec.base_seed = s;
            }
            if let Some(dir) = out {
                spec.output_dir = dir;
            }
            let stats = run_batch(&spec)?;
            print!("{}", to_json(&stats)?);
        }
        Command::Stats { dir, check } => {
            let stats = recompute_stats(&dir)?;
            if check && stats != read_summary(&dir)? {
                bail!("recomputed statistics differ from {}", dir.join("summary.json").display());
            }
            print!("{}", to_json(&stats)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
