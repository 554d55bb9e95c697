//! `tasc`: batch front end. Reports go to stdout (or `--out`) as JSON or
//! CSV; human-readable summaries and warnings go to stderr.
//!
//! Exit status: 0 on success, 1 when an invariant check fails, 2 on bad
//! input.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Params;

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Invariant(String),
}

impl Failure {
    pub fn input(msg: impl Into<String>) -> Self {
        Failure::Input(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Failure::Invariant(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Invariant(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Invariant(m) => write!(f, "invariant violated: {m}"),
        }
    }
}

impl From<tasc::Error> for Failure {
    fn from(e: tasc::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Invariant(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(
    name = "tasc",
    version,
    about = "Task-adaptive tokenization and n-gram speculative decoding"
)]
struct Cli {
    /// TOML file of run parameters; its values override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Turn on invariant assertions (exit 1 on violation).
    #[arg(long, global = true)]
    oracle_check: bool,

    #[command(flatten)]
    params: Params,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Word n-gram entropy and coverage of inputs versus outputs.
    Analyze(commands::AnalyzeArgs),
    /// Enrich a base vocabulary with task n-grams.
    Augment(commands::AugmentArgs),
    /// Build and save corpus drafter tables.
    BuildDrafter(commands::BuildDrafterArgs),
    /// Run speculative decoding against a reference or offline target.
    Simulate(commands::SimulateArgs),
    /// Answer an offline request file with a reference target.
    Respond(commands::RespondArgs),
    /// Kendall tau and directional success rate of H2 against runtime.
    Predict(commands::PredictArgs),
}

fn run(cli: Cli) -> Result<(), Failure> {
    let params = match &cli.config {
        Some(path) => cli.params.overlay(Params::from_file(path)?),
        None => cli.params,
    };
    let cfg = params.resolve()?;
    let check = cli.oracle_check;
    match cli.command {
        Command::Analyze(a) => commands::analyze(&cfg, &a),
        Command::Augment(a) => commands::augment(&cfg, &a, check),
        Command::BuildDrafter(a) => commands::build_drafter(&cfg, &a),
        Command::Simulate(a) => commands::simulate(&cfg, &a, check),
        Command::Respond(a) => commands::respond(&cfg, &a),
        Command::Predict(a) => commands::predict(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tasc: {e}");
            ExitCode::from(e.code())
        }
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn command_definition_is_consistent() {
        use clap::CommandFactory;
        super::Cli::command().debug_assert();
    }
}
