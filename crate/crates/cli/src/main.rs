//! `aggremc` — collective label inference and aggregate network queries.
//!
//! One config file drives a pipeline of persisted stages: train per-node
//! category priors, ground the relational model, find the MAP state, sample
//! the joint label distribution, estimate the aggregate queries, and score
//! them against ground truth. `aggremc pipeline <config>` runs everything;
//! `aggremc <stage> <config>` re-runs a single stage from the artifacts on
//! disk.

mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use config::{load_config, Mode, RunConfig};

#[derive(Parser)]
#[command(
    name = "aggremc",
    version,
    about = "Infer missing node labels and estimate aggregate network properties"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// Run configuration file (flat `key = value` lines).
    config: PathBuf,
    /// Override the config's estimator mode.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Override the config's global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage in order, then print the evaluation report.
    Pipeline(StageArgs),
    /// Train the local predictor and write per-node category priors.
    Prior(StageArgs),
    /// Instantiate the model into ground potentials and constraints.
    Ground(StageArgs),
    /// Find the most probable joint label assignment.
    Map(StageArgs),
    /// Draw posterior samples, starting from the MAP state.
    Sample(StageArgs),
    /// Estimate the aggregate queries under the configured mode.
    Query(StageArgs),
    /// Score the estimates against ground truth and write the report.
    Evaluate(StageArgs),
}

fn resolve(args: &StageArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = load_config(&args.config)?;
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn run_stage(
    name: &'static str,
    stage: fn(&RunConfig) -> anyhow::Result<()>,
    args: &StageArgs,
) -> anyhow::Result<()> {
    let cfg = resolve(args).with_context(|| format!("stage {name}"))?;
    stage(&cfg).with_context(|| format!("stage {name}"))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Pipeline(args) => {
            let cfg = resolve(&args).context("pipeline")?;
            stages::cmd_pipeline(&cfg)
        }
        Command::Prior(args) => run_stage("prior", stages::stage_prior, &args),
        Command::Ground(args) => run_stage("ground", stages::stage_ground, &args),
        Command::Map(args) => run_stage("map", stages::stage_map, &args),
        Command::Sample(args) => run_stage("sample", stages::stage_sample, &args),
        Command::Query(args) => run_stage("query", stages::stage_query, &args),
        Command::Evaluate(args) => run_stage("evaluate", stages::stage_evaluate, &args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
