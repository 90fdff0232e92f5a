//! `q2o` command-line driver.
//!
//! * `optimize` solves one instance file and prints the order and its hint.
//! * `bench` times baseline and hinted runs per workload query (live or from
//!   recorded fixtures) and writes the report CSV.
//! * `report` turns a report CSV into a bar chart and aggregate figures.

pub mod bench;
pub mod optimize;
pub mod report;
pub mod solve;

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use bench::BenchArgs;
pub use optimize::{optimize, Emit, OptimizeArgs, Output};
pub use solve::SolveArgs;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    NoSuccess(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Solver(_) => 3,
            CliError::NoSuccess(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "q2o",
    version,
    about = "Join-order optimization with annealing and pg_hint_plan hints"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance file.
    Optimize(OptimizeArgs),
    /// Benchmark a workload against PostgreSQL or recorded fixtures.
    Bench(BenchArgs),
    /// Chart and aggregate a report CSV.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// SVG path; defaults to the input path with an `.svg` extension.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Writes the chart and returns the per-query table plus the aggregate line.
pub fn report_command(args: &ReportArgs) -> Result<String, CliError> {
    use report::{aggregate, chart_entries, read_csv, render_svg};

    let file = std::fs::File::open(&args.input)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", args.input.display())))?;
    let rows = read_csv(file).map_err(|e| CliError::Input(e.to_string()))?;
    let entries = chart_entries(&rows).map_err(|e| CliError::Input(e.to_string()))?;
    let gains: Vec<_> = entries.iter().map(|e| e.gains.clone()).collect();
    let agg = aggregate(&gains).map_err(|_| {
        CliError::NoSuccess(format!("{}: no successful rows", args.input.display()))
    })?;
    let svg_path = args
        .output
        .clone()
        .unwrap_or_else(|| args.input.with_extension("svg"));
    std::fs::write(&svg_path, render_svg(&entries))
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", svg_path.display())))?;

    let mut out = String::new();
    for e in &entries {
        let _ = writeln!(
            out,
            "{}\texec {:.2}x\te2e {:.2}x\treduction {:.2}%{}",
            e.gains.query,
            e.gains.exec_gain,
            e.gains.e2e_gain,
            e.gains.reduction_pct,
            if e.breakdown.hint_honored {
                ""
            } else {
                "\thint not honored"
            }
        );
    }
    let _ = writeln!(out, "{agg}");
    Ok(out)
}
