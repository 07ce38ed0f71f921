//! `deterrence`: batch front end for simulation, ingestion, panel assembly,
//! model fitting, recovery checks, GAM fits and report tables.
//!
//! Exit status: 0 success, 1 usage or config error, 2 data error, 3 failed
//! recovery check.

mod commands;
mod config;
mod failure;
mod gam;
mod recover;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use failure::CmdResult;

#[derive(Parser)]
#[command(name = "deterrence", version, about = "Patrol-effort deterrence modelling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Plain-text `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for simulation and provenance; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if absent.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Config override `key=value`; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate effort and observation rasters, features and ground truth.
    Simulate(#[command(flatten)] Common),
    /// Rasterize waypoint and observation CSVs.
    Ingest(#[command(flatten)] Common),
    /// Assemble and write the standardized regression panel.
    Panel(#[command(flatten)] Common),
    /// Fit a model variant for one or more pairings or windows.
    Fit(#[command(flatten)] Common),
    /// Check coefficient recovery on simulated data over several seeds.
    Recover(#[command(flatten)] Common),
    /// Fit the additive model and write component curves.
    Gam(#[command(flatten)] Common),
    /// Render coefficient tables from fit JSON files.
    Report(#[command(flatten)] Common),
}

fn run(command: Command) -> CmdResult {
    let (name, common, f): (&'static str, Common, fn(&RunConfig) -> CmdResult) = match command {
        Command::Simulate(c) => ("simulate", c, commands::cmd_simulate),
        Command::Ingest(c) => ("ingest", c, commands::cmd_ingest),
        Command::Panel(c) => ("panel", c, commands::cmd_panel),
        Command::Fit(c) => ("fit", c, commands::cmd_fit),
        Command::Recover(c) => ("recover", c, recover::cmd_recover),
        Command::Gam(c) => ("gam", c, gam::cmd_gam),
        Command::Report(c) => ("report", c, commands::cmd_report),
    };
    let cfg = RunConfig::load(
        name,
        common.config.as_deref(),
        &common.overrides,
        common.seed,
        common.out_dir,
    )?;
    f(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            log::error!("{failure}");
            failure.exit_code()
        }
    }
}
