//! `pevmarket`: market classification, selection sweeps, pricing
//! equilibria and queue simulations as CSV.
//!
//! Exit codes: 0 success, 1 invalid input, 2 non-convergence, 3 overload.

mod commands;
mod table;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use std::{fs, io};
use table::CsvTable;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "pevmarket", version, about = "Two-station EV charging market equilibria")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Market file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file; stdout when omitted
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// RNG seed: simulation stream, or a random DSSA start when given
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Coarse grid intervals for best responses
    #[arg(long, global = true, default_value_t = 2000)]
    pub grid: usize,
    /// DSSA relative stopping tolerance
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub eps: f64,
    /// DSSA step shrink factor
    #[arg(long, global = true, default_value_t = 0.5)]
    pub alpha: f64,
    /// DSSA initial step; a tenth of the price box when omitted
    #[arg(long, global = true)]
    pub delta0: Option<f64>,
    /// DSSA iteration budget
    #[arg(long = "max-iter", global = true, default_value_t = 200)]
    pub max_iter: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Capacity scenario and price-difference thresholds
    Classify,
    /// Selection equilibrium over a range of prices or price differences
    Sweep(SweepArgs),
    /// Best responses, uniqueness conditions and pricing equilibria
    Pricing(PricingArgs),
    /// Simulate one station's queue and compare with the wait formula
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepVariable {
    #[value(name = "delta_p", alias = "delta-p")]
    DeltaP,
    P1,
    P2,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "delta_p")]
    pub variable: SweepVariable,
    #[arg(long, allow_negative_numbers = true)]
    pub from: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub to: f64,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Price of the other station for p1/p2 sweeps; midpoint of the box when omitted
    #[arg(long)]
    pub fixed: Option<f64>,
    /// Comma-separated subset of output columns
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PricingMode {
    BestResponseCurve,
    CheckConditions,
    Dssa,
    BruteForce,
}

#[derive(Debug, Args)]
pub struct PricingArgs {
    #[arg(value_enum)]
    pub mode: PricingMode,
    /// Station whose price DSSA searches
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=2))]
    pub station: u32,
    /// DSSA start price
    #[arg(long)]
    pub p_init: Option<f64>,
    /// Rival prices on the best-response curve
    #[arg(long, default_value_t = 51)]
    pub points: usize,
    /// Lower end of the checked region; p_min when omitted
    #[arg(long)]
    pub a: Option<f64>,
    /// Upper end of the checked region; p_max when omitted
    #[arg(long)]
    pub b: Option<f64>,
    /// Sample prices for the uniqueness check
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ServiceKind {
    Exponential,
    Deterministic,
    Lognormal,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=2))]
    pub station: u32,
    /// Length of the served segment
    #[arg(long, allow_negative_numbers = true)]
    pub segment: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub arrivals: usize,
    #[arg(long, value_enum, default_value = "exponential")]
    pub service: ServiceKind,
    /// Lognormal service-time standard deviation; the station's sigma when omitted
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    Overload(String),
    #[error("cannot write output: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) | CliError::Io(_) => 1,
            CliError::NotConverged(_) => 2,
            CliError::Overload(_) => 3,
        }
    }
}

/// A finished table plus the error to report after writing it, if any.
pub struct Output {
    pub table: CsvTable,
    pub failure: Option<CliError>,
}

impl From<CsvTable> for Output {
    fn from(table: CsvTable) -> Self {
        Output { table, failure: None }
    }
}

fn write_table(table: &CsvTable, out: Option<&PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => table.write_to(io::BufWriter::new(fs::File::create(path)?))?,
        None => table.write_to(io::stdout().lock())?,
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let output = commands::dispatch(cli)?;
    write_table(&output.table, cli.global.out.as_ref())?;
    output.failure.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
