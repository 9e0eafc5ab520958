//! `sps`: reproducible runs of the single-photon-source models.

mod commands;
mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sps_core::Execution;

use crate::commands::{budget, calibrate, drive, hom, metrics, mode_fit, stack};
use crate::config::{section_name, Section, Source};
use crate::error::CliError;
use crate::run::RunContext;

#[derive(Parser)]
#[command(name = "sps", version, about = "Cavity-QED single-photon source modelling")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config, or a manifest.json from an earlier run to replay it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for sweeps (0 or unset: all cores, 1: sequential).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Seed for synthetic data; defaults to the manifest's seed, else 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Efficiency versus cavity decay rate, optimal κ and field-derived rates.
    Metrics,
    /// Rabi map of the filtered-pulse excitation and the π-pulse point.
    Drive,
    /// Reflectance/transmittance spectrum and Q of a layer stack.
    Stack,
    /// Gaussian-beam fit of the cavity output mode.
    ModeFit,
    /// g²(0) and corrected two-photon interference visibility.
    Hom,
    /// System-efficiency budget and its sensitivities.
    Budget,
    /// Detector correction, count rate ↔ efficiency and decay-rate fit.
    Calibrate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Metrics => "metrics",
            Command::Drive => "drive",
            Command::Stack => "stack",
            Command::ModeFit => "mode-fit",
            Command::Hom => "hom",
            Command::Budget => "budget",
            Command::Calibrate => "calibrate",
        }
    }
}

fn execute<S: Section>(
    name: &str,
    src: &Source,
    ctx: RunContext,
    resolve: impl FnOnce(&mut S, &Source),
    body: impl FnOnce(&S, &mut RunContext) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let mut cfg: S = src.section()?;
    resolve(&mut cfg, src);
    let mut ctx = ctx;
    body(&cfg, &mut ctx)?;
    ctx.finish(name, &cfg)
}

fn no_paths<S>(_: &mut S, _: &Source) {}

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    let mut src = match &cli.config {
        Some(p) => Source::load(p)?,
        None => Source::empty(),
    };
    let name = cli.command.name();
    if let Some(r) = &src.replay {
        if section_name(&r.command) != section_name(name) {
            return Err(CliError::Config(format!("manifest was written by `{}`, not `{name}`", r.command)));
        }
    }
    src.apply_env(std::env::vars())?;
    let seed = cli.seed.or(src.replay.as_ref().map(|r| r.seed)).unwrap_or(0);
    let exec = match cli.workers {
        None | Some(0) => Execution::Auto,
        Some(n) => Execution::with_workers(n),
    };
    let ctx = RunContext::new(cli.out.clone(), exec, seed)?;
    match cli.command {
        Command::Metrics => execute::<metrics::MetricsConfig>(name, &src, ctx, no_paths, metrics::run),
        Command::Drive => execute::<drive::DriveConfig>(name, &src, ctx, no_paths, drive::run),
        Command::Stack => execute(name, &src, ctx, stack::StackConfig::resolve, stack::run),
        Command::ModeFit => execute(name, &src, ctx, mode_fit::ModeFitConfig::resolve, mode_fit::run),
        Command::Hom => execute(name, &src, ctx, hom::HomConfig::resolve, hom::run),
        Command::Budget => execute::<budget::BudgetConfig>(name, &src, ctx, no_paths, budget::run),
        Command::Calibrate => execute(name, &src, ctx, calibrate::CalibrateConfig::resolve, calibrate::run),
    }?;
    Ok(cli.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            println!("results written to {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
