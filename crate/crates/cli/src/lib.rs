//! Command-line driver: configuration parsing and subcommands.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{CliError, CliResult};
use config::{RunConfig, KEYS_HELP};

#[derive(Parser, Debug)]
#[command(name = "schwarz", version, about = "Two-level overlapping Schwarz toolkit for Darcy systems", after_help = KEYS_HELP)]
pub struct Cli {
    /// Configuration file with `section.key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration key (repeatable), e.g. `--set problem.nx=128`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Assemble, precondition and solve; writes the CSV, report JSON and pressure raster.
    Solve,
    /// Generate the random-graph training corpus.
    Corpus,
    /// Write SGB1 records and CBX1 exact bases for every subdomain.
    Export,
    /// Compare imported bases with freshly computed ones.
    ImportCheck,
    /// Ã-distance between two CBX1 bases of one subdomain.
    Distance {
        /// SGB1 record of the subdomain.
        #[arg(long)]
        record: PathBuf,
        a: PathBuf,
        b: PathBuf,
    },
    /// Dense condition number of the preconditioned operator and its bound.
    Condest,
    /// Every permeability family under C1/C2 and each coarse mode, one CSV per cell.
    Bench,
}

/// Runs a parsed command line, returning the text to print.
pub fn run(cli: &Cli) -> CliResult<String> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        // a second initialization (tests calling run twice) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match &cli.command {
        Command::Solve => commands::cmd_solve(&cfg),
        Command::Corpus => commands::cmd_corpus(&cfg),
        Command::Export => commands::cmd_export(&cfg),
        Command::ImportCheck => commands::cmd_import_check(&cfg),
        Command::Distance { record, a, b } => commands::cmd_distance(record, a, b),
        Command::Condest => commands::cmd_condest(&cfg),
        Command::Bench => commands::cmd_bench(&cfg),
    }
}
