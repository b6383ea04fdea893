//! Command-line orchestration for `stmado`: JSON configuration, output
//! directories with manifests, simulation studies and the end-to-end
//! pipeline for gridded data.

pub mod commands;
pub mod config;
pub mod failure;
pub mod manifest;
pub mod pipeline;
pub mod study;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::CommandConfig;
pub use crate::failure::{CliResult, Failure, FailureKind};
use crate::manifest::{Artifacts, Manifest};

#[derive(Debug, Parser)]
#[command(name = "stmado", version, about = "Space-time max-stable modelling on regular grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for parallel replicates and fits (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a field from a model.
    Simulate(RunArgs),
    /// Estimate spatial, temporal and joint F-madograms of a field.
    Madogram(RunArgs),
    /// Fit one model family by weighted least squares.
    Fit(RunArgs),
    /// Fit candidate families and rank them by AIC.
    Select(RunArgs),
    /// Run a simulation study and report mean, RMSE and MAE.
    Study(RunArgs),
    /// Fit marginal laws per site and transform to unit Fréchet.
    Margins(RunArgs),
    /// Permutation bands for spatial and temporal independence.
    Permtest(RunArgs),
    /// Raw data to selected model, end to end.
    Pipeline(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Command configuration, or a manifest from an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Loads the config, runs `body` and writes the manifest whether or not
/// `body` succeeded.
pub fn execute<C, T>(
    config: &Path,
    seed: Option<u64>,
    out: &Path,
    body: impl FnOnce(&C, &mut Artifacts) -> CliResult<T>,
) -> CliResult<(T, Manifest)>
where
    C: CommandConfig,
{
    let mut cfg: C = config::load(config, seed)?;
    let mut artifacts = Artifacts::create(out)?;
    let outcome = body(&cfg, &mut artifacts);
    let seed = *cfg.seed_mut();
    let manifest = artifacts.finish(C::NAME, seed, serde_json::to_value(&cfg)?, outcome.as_ref().err())?;
    outcome.map(|value| (value, manifest))
}

fn dispatch(command: &Command) -> CliResult<String> {
    fn go<C: CommandConfig, T>(
        a: &RunArgs,
        body: impl FnOnce(&C, &mut Artifacts) -> CliResult<T>,
        describe: impl FnOnce(&T) -> String,
    ) -> CliResult<String> {
        let (value, manifest) = execute(&a.config, a.seed, &a.out, body)?;
        Ok(format!(
            "{}; {} files in {}",
            describe(&value),
            manifest.outputs.len(),
            a.out.display()
        ))
    }
    match command {
        Command::Simulate(a) => go(a, commands::simulate, |f| {
            format!("simulated {0}x{0}x{1} field", f.n(), f.t_len())
        }),
        Command::Madogram(a) => go(a, commands::madogram, |e| {
            format!(
                "{} joint lag estimates",
                e.spatial.len() + e.temporal.len() + e.joint.len()
            )
        }),
        Command::Fit(a) => go(a, commands::fit, |r| {
            format!("fitted {} (objective {:e})", r.model.family(), r.objective)
        }),
        Command::Select(a) => go(a, commands::select, |r| format!("selected {}", r.selected)),
        Command::Study(a) => go(a, study::run_study, |r| {
            format!("{}/{} replicates fitted", r.succeeded, r.replicates)
        }),
        Command::Margins(a) => go(a, commands::margins, |r| {
            format!("fitted margins at {} sites", r.sites.len())
        }),
        Command::Permtest(a) => go(a, commands::permtest, |r| format!("dependence ranges {r:?}")),
        Command::Pipeline(a) => go(a, pipeline::run_pipeline, |s| {
            format!(
                "selected {} with dependence ranges {:?}",
                s.selected, s.dependence_range
            )
        }),
    }
}

/// Runs a parsed command line, on a dedicated pool when `--threads` is set.
pub fn run(cli: &Cli) -> CliResult<String> {
    match cli.threads {
        Some(0) => Err(Failure::config("--threads must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::config(e.to_string()))?;
            pool.install(|| dispatch(&cli.command))
        }
        None => dispatch(&cli.command),
    }
}
