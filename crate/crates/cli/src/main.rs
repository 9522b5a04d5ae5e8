//! Operator entry point: analyze traceroute corpora against RIB snapshots,
//! compare measurements, cross-check against hygiene datasets, generate
//! synthetic ground-truth corpora, and fetch collector archives.

mod cmd_analyze;
mod cmd_crosscheck;
mod cmd_fetch;
mod cmd_similarity;
mod cmd_synth;
mod config;
mod manifest;
mod runs;

use clap::{Parser, Subcommand};

/// Exit codes: 0 success, 2 configuration error, 3 input parse error,
/// 4 empty-result guard.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Parse(String),
    Empty(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Empty(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Parse(m) | CliError::Empty(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.message())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "bogontrace",
    version,
    about = "Find autonomous systems transiting packets with bogon source addresses",
    long_about = "Joins traceroute corpora against BGP routing-table snapshots, classifies \
                  bogon transit per AS (BA/BB/BC cases), aggregates prevalence statistics and \
                  similarity matrices, and cross-checks the results against spoofing-test and \
                  anti-spoofing pledge datasets."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline over one measurement and write its reports.
    Analyze(cmd_analyze::AnalyzeArgs),
    /// Compare ASN sets across prior runs: similarity matrices, occurrence
    /// counts and the per-year pivot.
    Similarity(cmd_similarity::SimilarityArgs),
    /// Join prior runs against spoofer, MANRS and AS-metadata snapshots.
    Crosscheck(cmd_crosscheck::CrosscheckArgs),
    /// Synthetic ground-truth corpora.
    #[command(subcommand)]
    Synth(cmd_synth::SynthCommand),
    /// Resolve and download collector archive files into a content-addressed
    /// cache.
    Fetch(cmd_fetch::FetchArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => cmd_analyze::run(args),
        Command::Similarity(args) => cmd_similarity::run(args),
        Command::Crosscheck(args) => cmd_crosscheck::run(args),
        Command::Synth(cmd) => cmd_synth::run(cmd),
        Command::Fetch(args) => cmd_fetch::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {}", err.message());
        std::process::exit(err.exit_code());
    }
}
