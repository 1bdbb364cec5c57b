//! `finrel` — scenario-driven front end for the probability-geometry
//! pricing engine.
//!
//! Exit codes: 0 on success, 1 on validation errors (unparsable scenarios,
//! missing sections, unresolved labels), 2 on numerical failures.

mod commands;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use finrel::information::LogBase;

use commands::Overrides;
use scenario::{validation, AppError, Scenario};

#[derive(Parser)]
#[command(
    name = "finrel",
    version,
    about = "Pricing over curved probability geometries"
)]
struct Cli {
    /// Output directory for JSON and CSV reports.
    #[arg(long, global = true, env = "FINREL_OUT", default_value = ".")]
    out: PathBuf,

    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Entropy base: 2 (bits) or e (nats).
    #[arg(long, global = true, default_value = "2", value_parser = parse_base)]
    base: LogBase,

    /// Override the price-level grouping tolerance.
    #[arg(long, global = true)]
    tolerance: Option<f64>,

    /// Override the number of Monte Carlo paths.
    #[arg(long, global = true)]
    paths: Option<usize>,

    /// Override the simulation step size.
    #[arg(long, global = true)]
    dt: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Field-equation operations.
    Field {
        #[command(subcommand)]
        action: FieldAction,
    },
    /// Select the maximum-entropy geometry under scenario constraints.
    Maxent { scenario: PathBuf },
    /// Price the payoff along the filtration by projection.
    Price { scenario: PathBuf },
    /// Entropy accounting: what prices reveal and what stays hidden.
    Info { scenario: PathBuf },
    /// Classify the observation frame and report apparent drifts.
    Frames { scenario: PathBuf },
    /// Monte Carlo filtering paths with endogenous volatility.
    Simulate { scenario: PathBuf },
    /// Replay an embedded fixture and verify its golden values.
    Reproduce { fixture: String },
}

#[derive(Subcommand)]
enum FieldAction {
    /// Solve the field equation and print the potential and geometry.
    Solve { scenario: PathBuf },
}

fn parse_base(s: &str) -> Result<LogBase, String> {
    match s {
        "2" => Ok(LogBase::Two),
        "e" => Ok(LogBase::E),
        other => Err(format!("unknown base `{other}`; expected `2` or `e`")),
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    let overrides = Overrides {
        seed: cli.seed,
        paths: cli.paths,
        dt: cli.dt,
        tolerance: cli.tolerance,
        base: cli.base,
    };
    let load = |path: &PathBuf| Scenario::load(path);
    match &cli.command {
        Command::Field {
            action: FieldAction::Solve { scenario },
        } => commands::field_solve(&load(scenario)?, &cli.out),
        Command::Maxent { scenario } => commands::maxent(&load(scenario)?, &cli.out, &overrides),
        Command::Price { scenario } => commands::price(&load(scenario)?, &cli.out),
        Command::Info { scenario } => commands::info(&load(scenario)?, &cli.out, &overrides),
        Command::Frames { scenario } => commands::frames(&load(scenario)?, &cli.out),
        Command::Simulate { scenario } => {
            commands::simulate(&load(scenario)?, &cli.out, &overrides)
        }
        Command::Reproduce { fixture } => commands::reproduce_fixture(fixture, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = validation(e);
            eprintln!("{err}");
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
