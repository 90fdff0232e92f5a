//! Live-database side of the pipeline: catalog row estimates, and
//! `EXPLAIN (ANALYZE, FORMAT JSON)` timings for a query with and without its
//! `pg_hint_plan` hint.
//!
//! Everything is written against the [`Session`] trait; [`PgSession`] is the
//! real implementation over the `postgres` crate.

mod plan;
mod session;

pub use plan::{parse_explain, plan_leaf_aliases};
pub use session::{ConnectionSettings, PasswordSource, PgSession};

use q2o_core::hints::{prepend_hint, HintError, PlanHint};
use q2o_core::joingraph::JoinGraph;
use q2o_core::Scalar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Prefix of every timed statement.
pub const EXPLAIN_PREFIX: &str = "EXPLAIN (ANALYZE, FORMAT JSON) ";
/// Catalog lookup for a relation's planner row estimate.
pub const RELTUPLES_QUERY: &str = "SELECT reltuples FROM pg_class WHERE relname = $1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PgError {
    #[error("connection error: {0}")]
    Connection(String),
    #[error("no such table `{0}`")]
    NoSuchTable(String),
    #[error("server error: {0}")]
    Sql(String),
    #[error("statement exceeded statement_timeout")]
    Timeout,
    #[error("cannot read EXPLAIN output: {0}")]
    Parse(String),
    #[error("invalid connection settings: {0}")]
    Settings(String),
    #[error(transparent)]
    Hint(#[from] HintError),
}

/// One open connection. Implementations run one statement at a time.
pub trait Session {
    /// Runs a statement returning a single text cell (EXPLAIN output).
    fn query_text(&mut self, statement: &str) -> Result<String, PgError>;

    /// Runs [`RELTUPLES_QUERY`]; `None` when the relation does not exist.
    fn query_reltuples(&mut self, statement: &str, relname: &str) -> Result<Option<f64>, PgError>;

    /// Runs a statement and discards its rows.
    fn execute(&mut self, statement: &str) -> Result<(), PgError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedRun {
    pub planning_ms: f64,
    pub execution_ms: f64,
    /// Raw EXPLAIN document.
    pub plan_text: String,
}

/// Per-query latency components, baseline and hinted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub query: String,
    pub pg_planning_ms: f64,
    pub pg_execution_ms: f64,
    pub hint_planning_ms: f64,
    pub hint_execution_ms: f64,
    pub solver_ms: f64,
    pub hint_honored: bool,
}

impl LatencyBreakdown {
    pub fn components(&self) -> [f64; 5] {
        [
            self.pg_planning_ms,
            self.pg_execution_ms,
            self.hint_planning_ms,
            self.hint_execution_ms,
            self.solver_ms,
        ]
    }
}

/// Planner row estimate for `table`, clamped to at least 1.
pub fn fetch_cardinality(session: &mut dyn Session, table: &str) -> Result<f64, PgError> {
    session
        .query_reltuples(RELTUPLES_QUERY, table)?
        .map(|rows| rows.max(1.0))
        .ok_or_else(|| PgError::NoSuchTable(table.to_string()))
}

/// Replaces every relation's cardinality with the catalog estimate of its table.
pub fn refresh_cardinalities<T: Scalar>(
    session: &mut dyn Session,
    graph: &JoinGraph<T>,
) -> Result<JoinGraph<T>, PgError> {
    let mut out = graph.clone();
    for rel in graph.relations() {
        let rows = fetch_cardinality(session, &rel.table)?;
        out = out
            .with_cardinality(&rel.alias, rows)
            .expect("alias comes from the graph");
    }
    Ok(out)
}

pub fn explain_analyze(session: &mut dyn Session, sql: &str) -> Result<TimedRun, PgError> {
    let text = session.query_text(&format!("{EXPLAIN_PREFIX}{sql}"))?;
    parse_explain(&text)
}

/// Untimed execution ahead of measurement.
pub fn warm_up(session: &mut dyn Session, sql: &str) -> Result<(), PgError> {
    session.execute(sql)
}

/// Times the bare query, then the hinted query. Any failure discards both.
pub fn run_pair(
    session: &mut dyn Session,
    query: &str,
    sql: &str,
    hint: &PlanHint,
    solver_ms: f64,
) -> Result<LatencyBreakdown, PgError> {
    let hinted_sql = prepend_hint(sql, hint)?;
    let baseline = explain_analyze(session, sql)?;
    let hinted = explain_analyze(session, &hinted_sql)?;
    let expected = hint.tree.leaves();
    let observed = plan_leaf_aliases(&hinted.plan_text)?;
    let observed: Vec<&str> = observed
        .iter()
        .map(String::as_str)
        .filter(|a| expected.contains(a))
        .collect();
    Ok(LatencyBreakdown {
        query: query.to_string(),
        pg_planning_ms: baseline.planning_ms,
        pg_execution_ms: baseline.execution_ms,
        hint_planning_ms: hinted.planning_ms,
        hint_execution_ms: hinted.execution_ms,
        solver_ms,
        hint_honored: observed == expected,
    })
}
