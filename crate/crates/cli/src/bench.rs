use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use q2o_core::joingraph::parse_join_graph;
use q2o_core::JoinGraphF64;
use q2o_pgclient::{refresh_cardinalities, run_pair, warm_up, LatencyBreakdown, Session};

use crate::report::{aggregate, compute_gains, write_csv, GainRow, ReportRow};
use crate::solve::{solve_instance, SolveArgs};
use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Directory of instance files (`*.json`) with SQL text.
    #[arg(long)]
    pub workload: Option<PathBuf>,
    /// Recorded latency breakdowns (JSON array); replaces the database.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Report CSV path. Without it the CSV goes to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Run each query once, untimed, before measuring (default).
    #[arg(long, overrides_with = "no_warmup")]
    pub warmup: bool,
    #[arg(long, overrides_with = "warmup")]
    pub no_warmup: bool,
    /// Replace instance cardinalities with catalog row estimates before solving.
    #[arg(long)]
    pub refresh_cardinalities: bool,
    #[command(flatten)]
    pub solve: SolveArgs,
}

impl BenchArgs {
    pub fn warmup_enabled(&self) -> bool {
        !self.no_warmup
    }
}

/// A workload entry: the query id and its parsed instance, or why it failed to load.
pub type WorkloadEntry = (String, Result<JoinGraphF64, String>);

/// Instance files in file-name order. Query ids are instance names, or the
/// file stem when the file does not parse.
pub fn load_workload(dir: &Path) -> Result<Vec<WorkloadEntry>, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Input(format!("cannot read workload {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|p| {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            match std::fs::read_to_string(&p) {
                Ok(text) => match parse_join_graph::<f64>(&text) {
                    Ok(g) => (g.name().to_string(), Ok(g)),
                    Err(e) => (stem, Err(e.to_string())),
                },
                Err(e) => (stem, Err(e.to_string())),
            }
        })
        .collect())
}

pub fn load_fixtures(path: &Path) -> Result<Vec<LatencyBreakdown>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: not a fixture list: {e}", path.display())))
}

fn gain_row(b: &LatencyBreakdown) -> ReportRow {
    match compute_gains(b) {
        Ok(g) => ReportRow::success(b, &g),
        Err(e) => ReportRow::failure(&b.query, e),
    }
}

/// Where timings come from.
pub enum Source<'a> {
    Fixtures(Vec<LatencyBreakdown>),
    Live(&'a mut dyn Session),
}

/// One report row per query, in workload order (or fixture order without a workload).
pub fn run_bench(args: &BenchArgs, source: Source<'_>) -> Result<Vec<ReportRow>, CliError> {
    let workload = match &args.workload {
        Some(dir) => {
            let w = load_workload(dir)?;
            if w.is_empty() {
                return Err(CliError::NoSuccess(format!(
                    "workload {} has no instance files",
                    dir.display()
                )));
            }
            Some(w)
        }
        None => None,
    };

    match (source, workload) {
        (Source::Fixtures(fixtures), None) => Ok(fixtures.iter().map(gain_row).collect()),
        (Source::Fixtures(fixtures), Some(workload)) => {
            let by_query: HashMap<&str, &LatencyBreakdown> =
                fixtures.iter().map(|b| (b.query.as_str(), b)).collect();
            Ok(workload
                .into_iter()
                .map(|(query, graph)| {
                    let row = graph
                        .and_then(|g| solve_instance(&g, &args.solve).map_err(|e| e.to_string()))
                        .and_then(|_| {
                            by_query
                                .get(query.as_str())
                                .map(|b| gain_row(b))
                                .ok_or_else(|| "no fixture for this query".to_string())
                        });
                    row.unwrap_or_else(|e| ReportRow::failure(&query, e))
                })
                .collect())
        }
        (Source::Live(_), None) => Err(CliError::Input(
            "live benchmarking needs --workload <dir>".into(),
        )),
        (Source::Live(session), Some(workload)) => Ok(workload
            .into_iter()
            .map(|(query, graph)| {
                graph
                    .and_then(|g| live_query(session, &g, args))
                    .unwrap_or_else(|e| ReportRow::failure(&query, e))
            })
            .collect()),
    }
}

fn live_query(
    session: &mut dyn Session,
    graph: &JoinGraphF64,
    args: &BenchArgs,
) -> Result<ReportRow, String> {
    let sql = graph.sql().ok_or("missing sql text")?;
    let graph = if args.refresh_cardinalities {
        refresh_cardinalities(session, graph).map_err(|e| e.to_string())?
    } else {
        graph.clone()
    };
    let solved = solve_instance(&graph, &args.solve).map_err(|e| e.to_string())?;
    let hint = solved.hint.ok_or("a hint needs at least two relations")?;
    if args.warmup_enabled() {
        warm_up(session, sql).map_err(|e| e.to_string())?;
    }
    let b = run_pair(
        session,
        graph.name(),
        sql,
        &hint,
        solved.solution.wall_time_ms,
    )
    .map_err(|e| e.to_string())?;
    Ok(gain_row(&b))
}

pub struct BenchSummary {
    pub csv: String,
    /// Failed queries, then the aggregate line.
    pub text: String,
    pub any_success: bool,
}

/// Renders the CSV (and writes it to `output` when given) plus the summary.
pub fn finish(rows: &[ReportRow], output: Option<&Path>) -> Result<BenchSummary, CliError> {
    let mut csv = Vec::new();
    write_csv(&mut csv, rows).map_err(|e| CliError::Input(e.to_string()))?;
    let csv = String::from_utf8(csv).expect("csv writer emits utf-8");
    if let Some(path) = output {
        std::fs::write(path, &csv)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    }
    let gains: Vec<GainRow> = rows
        .iter()
        .filter(|r| r.error.is_empty())
        .filter_map(|r| {
            Some(GainRow {
                query: r.query.clone(),
                exec_gain: r.exec_gain?,
                e2e_gain: r.e2e_gain?,
                reduction_pct: r.reduction_pct?,
            })
        })
        .collect();
    let failed = rows.len() - gains.len();
    let mut summary = String::new();
    for r in rows.iter().filter(|r| !r.error.is_empty()) {
        let _ = writeln!(summary, "failed {}: {}", r.query, r.error);
    }
    let any_success = match aggregate(&gains) {
        Ok(a) => {
            let _ = writeln!(summary, "{a}, failed {failed}");
            true
        }
        Err(_) => {
            let _ = writeln!(summary, "no query succeeded ({failed} failed)");
            false
        }
    };
    Ok(BenchSummary {
        csv,
        text: summary,
        any_success,
    })
}
