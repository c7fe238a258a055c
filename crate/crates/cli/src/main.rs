//! `rpsim` — batch experiment runner for the one-sided matching
//! simulator.
//!
//! One binary with subcommands sharing a JSON config schema and seeding:
//! `generate | ratio | tail | bounds | adversarial | decompose`. Every
//! command is deterministic in its configuration: rerunning with the same
//! config (and any worker-thread count) produces byte-identical files.

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{ExperimentConfig, Format};
use rpsim_core::analysis::Model;
use rpsim_core::generators::DistributionSpec;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<rpsim_core::Error> for CliError {
    fn from(e: rpsim_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "rpsim",
    version,
    about = "Simulation and bound-verification experiments for Random Priority matching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one valuation instance and write it as JSON.
    Generate(CommonArgs),
    /// Estimate average-case OPT/RP welfare ratios per n.
    Ratio(CommonArgs),
    /// Measure Pr{SW_RP <= lambda} per n against the closed-form bound.
    Tail(CommonArgs),
    /// Print every closed-form threshold and bound for the configuration.
    Bounds(CommonArgs),
    /// Hill-climb for instances with a large OPT/RP ratio (n <= 7).
    Adversarial(CommonArgs),
    /// Decompose a doubly stochastic matrix into permutations.
    Decompose {
        /// Allocation matrix: header-free CSV, or JSON (`[[..]]` or
        /// `{"probs": [[..]]}`).
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Flag overrides applied on top of `--config`.
#[derive(Args)]
struct CommonArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Instance sizes, comma separated (overrides n_list).
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Instances per n.
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// i.i.d. value distribution as JSON, e.g. '{"kind":"beta","alpha":2,"beta":5}'.
    #[arg(long)]
    dist: Option<String>,
    /// Output file (stdout for table commands when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Table format.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Also write a per-trial detail file next to the output.
    #[arg(long)]
    detail: bool,
    /// Emit trial-count heartbeats on standard error.
    #[arg(long)]
    progress: bool,
}

fn build_config(common: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = &common.n {
        config.n_list = n.clone();
    }
    if let Some(trials) = common.trials {
        config.trials = trials;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(dist_json) = &common.dist {
        let dist: DistributionSpec = serde_json::from_str(dist_json)
            .map_err(|e| CliError::Config(format!("--dist: {e}")))?;
        config.model = Model::iid(dist);
    }
    if let Some(output) = &common.output {
        config.output = Some(output.clone());
    }
    if let Some(format) = common.format {
        config.format = format;
    }
    if common.detail {
        config.detail = true;
    }
    if common.progress {
        config.progress = true;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(common) => commands::run_generate(&build_config(common)?),
        Command::Ratio(common) => commands::run_ratio(&build_config(common)?),
        Command::Tail(common) => commands::run_tail(&build_config(common)?),
        Command::Bounds(common) => commands::run_bounds(&build_config(common)?),
        Command::Adversarial(common) => commands::run_adversarial(&build_config(common)?),
        Command::Decompose { input, common } => {
            commands::run_decompose(&build_config(common)?, input)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
