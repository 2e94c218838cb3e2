//! Command-line driver. Exit status: 0 on success, 2 when a checker reports
//! a failing condition (a finding), 1 on errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::Outcome;
use config::Params;

#[derive(Parser)]
#[command(
    name = "strongmin",
    version,
    about = "Strong minima of perturbed function sequences on finite metric spaces"
)]
struct Cli {
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    params: Params,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Infimal enlargement f_eps of one function.
    Enlarge,
    /// The eps-argmin set of one function and its diameter curve.
    Argmin,
    /// Pointwise convergence and the enlarged lower bound, as CSV.
    CheckConv,
    /// Numerical checks of the consequences of the convergence conditions.
    VerifyLemmas,
    /// Bump perturbation giving one function a certified strong minimum.
    Perturb,
    /// One perturbation localizing every member of a sequence.
    Simul,
    /// Build a named scenario and check its expected record.
    Gallery {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(strongmin::gallery::NAMES))]
        name: String,
    },
    /// Replay a saved perturb or simul run and compare its artifacts.
    Recheck {
        #[arg(long)]
        run: PathBuf,
    },
}

fn run(cli: Cli) -> Result<Outcome> {
    let base = match &cli.config {
        Some(path) => Params::from_file(path)?,
        None => Params::default(),
    };
    let p = cli.params.over(base);
    match cli.command {
        Command::Enlarge => commands::enlarge(&p),
        Command::Argmin => commands::argmin(&p),
        Command::CheckConv => commands::check_conv(&p),
        Command::VerifyLemmas => commands::verify_lemmas(&p),
        Command::Perturb => commands::perturb(&p),
        Command::Simul => commands::simul(&p),
        Command::Gallery { name } => commands::gallery(&name, &p),
        Command::Recheck { run } => commands::recheck(&run),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are errors, not findings.
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Finding(msg)) => {
            println!("finding: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
