//! Benchmark and analysis front end for the streambag library.
//!
//! Subcommands: `bench` (wall-time matrix with speedups), `rd` (reuse-distance
//! histograms), `eval` (prequential metrics and change counts). Exit codes:
//! 0 success, 2 usage error, 3 data error. All outputs are reproducible
//! byte-for-byte for a fixed plan and seed, except timing columns.

mod bench;
mod eval_cmd;
mod rd_cmd;
mod source;

use std::path::Path;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use streambag::ensembles::Variant;
use streambag::executor::ExecMode;

use source::CliResult;

#[derive(Parser)]
#[command(
    name = "streambag",
    version,
    about = "Benchmarks and analysis for online-bagging ensembles with mini-batch executors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time the (algorithm, ensemble size, batch size) matrix and report speedups
    Bench(bench::BenchArgs),
    /// Reuse-distance histograms of the training-phase member-access trace
    Rd(rd_cmd::RdArgs),
    /// Prequential metrics and change counts across batch sizes
    Eval(eval_cmd::EvalArgs),
}

/// Output families a command can write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Emit {
    Timings,
    Metrics,
    Rd,
    Changes,
}

impl Emit {
    /// The requested set, or the command's default set when none requested.
    pub fn effective(requested: &[Emit], default: &[Emit]) -> std::collections::BTreeSet<Emit> {
        if requested.is_empty() { default } else { requested }.iter().copied().collect()
    }
}

pub fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::from_str(s).map_err(|e| e.to_string())
}

pub fn parse_mode(s: &str) -> Result<ExecMode, String> {
    ExecMode::from_str(s).map_err(|e| e.to_string())
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

pub fn write_text(path: &Path, content: &str) -> CliResult<()> {
    std::fs::write(path, content)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(args) => bench::run_bench(args),
        Command::Rd(args) => rd_cmd::run_rd(args),
        Command::Eval(args) => eval_cmd::run_eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
