//! `nbmc`: plan, evaluate and run negative-binomial Monte Carlo estimates.
//!
//! Only the report goes to standard output; diagnostics go to standard error.
//! Exit codes: 0 success, 2 invalid or unachievable parameters, 3 computational
//! cap, 4 input format error, 5 verification failure, 1 internal error.

mod commands;
mod grid;
mod report;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CurvesArgs, ExactArgs, PlanArgs, RunArgs, VerifyArgs};
use report::Format;

#[derive(Debug, Parser)]
#[command(
    name = "nbmc",
    version,
    about = "Negative-binomial Monte Carlo estimation with guaranteed relative intervals"
)]
struct Cli {
    /// Report format
    #[arg(long, value_enum, default_value = "json", global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Smallest N that guarantees a confidence for a margin
    Plan(PlanArgs),
    /// Exact confidence of the interval for a given p
    Exact(ExactArgs),
    /// Run the stopping rule on a trial source
    Run(RunArgs),
    /// Numerically certify the supporting inequalities
    Verify(VerifyArgs),
    /// Guaranteed-confidence curves as CSV (m,N,c_bar,is_min_curve)
    Curves(CurvesArgs),
}

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub const INVALID: u8 = 2;
    pub const CAP: u8 = 3;
    pub const FORMAT: u8 = 4;
    pub const VERIFICATION: u8 = 5;

    pub fn invalid(message: impl Into<String>) -> Self {
        CliError { code: Self::INVALID, message: message.into() }
    }

    pub fn verification(message: impl Into<String>) -> Self {
        CliError { code: Self::VERIFICATION, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    pub fn output(err: std::io::Error) -> Self {
        CliError::internal(format!("cannot write report: {err}"))
    }
}

impl From<nbmc::Error> for CliError {
    fn from(err: nbmc::Error) -> Self {
        use nbmc::Error::*;
        let code = match err {
            InvalidParameter(_) | Unachievable(_) | PreconditionViolated(_) | Overflow(_) => Self::INVALID,
            TermCapExceeded { .. } => Self::CAP,
            Format { .. } | Io(_) => Self::FORMAT,
        };
        CliError { code, message: err.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan(args) => commands::plan(args, cli.format),
        Command::Exact(args) => commands::exact(args, cli.format),
        Command::Run(args) => commands::run(args, cli.format),
        Command::Verify(args) => commands::verify(args, cli.format),
        Command::Curves(args) => commands::curves(args, cli.format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
