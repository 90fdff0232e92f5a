//! Gain arithmetic, the report CSV and the bar-chart SVG.

use std::cmp::Ordering;
use std::fmt;
use std::fmt::Write as _;
use std::io::{Read, Write};

use q2o_pgclient::LatencyBreakdown;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Report CSV header, in column order.
pub const CSV_HEADER: &str = "query,pg_planning_ms,pg_exec_ms,hint_planning_ms,hint_exec_ms,solver_ms,hint_honored,exec_gain,e2e_gain,reduction_pct,error";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("query `{query}`: {field} must be {rule} (got {value})")]
    ZeroComponent {
        query: String,
        field: &'static str,
        rule: &'static str,
        value: f64,
    },
    #[error("no rows to aggregate")]
    EmptyInput,
    #[error("malformed report csv: {0}")]
    MalformedCsv(String),
    #[error("cannot write report: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    pub query: String,
    pub exec_gain: f64,
    pub e2e_gain: f64,
    pub reduction_pct: f64,
}

/// Execution-time and end-to-end speedups of the hinted run over the baseline.
///
/// Execution times must be positive. Planning and solver times may be zero.
pub fn compute_gains(b: &LatencyBreakdown) -> Result<GainRow, ReportError> {
    let bad = |field, rule, value| ReportError::ZeroComponent {
        query: b.query.clone(),
        field,
        rule,
        value,
    };
    let fields = [
        ("pg_planning_ms", b.pg_planning_ms),
        ("pg_exec_ms", b.pg_execution_ms),
        ("hint_planning_ms", b.hint_planning_ms),
        ("hint_exec_ms", b.hint_execution_ms),
        ("solver_ms", b.solver_ms),
    ];
    for (field, v) in fields {
        if !(v.is_finite() && v >= 0.0) {
            return Err(bad(field, "finite and non-negative", v));
        }
    }
    if b.pg_execution_ms <= 0.0 {
        return Err(bad("pg_exec_ms", "positive", b.pg_execution_ms));
    }
    if b.hint_execution_ms <= 0.0 {
        return Err(bad("hint_exec_ms", "positive", b.hint_execution_ms));
    }
    let pg_e2e = b.pg_planning_ms + b.pg_execution_ms;
    let hint_e2e = b.hint_planning_ms + b.hint_execution_ms + b.solver_ms;
    Ok(GainRow {
        query: b.query.clone(),
        exec_gain: b.pg_execution_ms / b.hint_execution_ms,
        e2e_gain: pg_e2e / hint_e2e,
        reduction_pct: 100.0 * (1.0 - b.hint_execution_ms / b.pg_execution_ms),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub total_queries: usize,
    /// Rows with `exec_gain > 1`.
    pub improved_count: usize,
    /// Over improved rows; 0 when there are none.
    pub max_reduction_pct: f64,
    pub avg_reduction_pct: f64,
    pub has_improvement: bool,
}

pub fn aggregate(rows: &[GainRow]) -> Result<AggregateReport, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let improved: Vec<f64> = rows
        .iter()
        .filter(|r| r.exec_gain > 1.0)
        .map(|r| r.reduction_pct)
        .collect();
    let (max, avg) = if improved.is_empty() {
        (0.0, 0.0)
    } else {
        (
            improved.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            improved.iter().sum::<f64>() / improved.len() as f64,
        )
    };
    Ok(AggregateReport {
        total_queries: rows.len(),
        improved_count: improved.len(),
        max_reduction_pct: max,
        avg_reduction_pct: avg,
        has_improvement: !improved.is_empty(),
    })
}

impl fmt::Display for AggregateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "queries {}, improved {}, max reduction {:.2}%, avg reduction {:.2}%",
            self.total_queries, self.improved_count, self.max_reduction_pct, self.avg_reduction_pct
        )?;
        if !self.has_improvement {
            write!(f, " (no improved queries)")?;
        }
        Ok(())
    }
}

/// One line of the report CSV. Failed queries carry only `query` and `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub query: String,
    pub pg_planning_ms: Option<f64>,
    pub pg_exec_ms: Option<f64>,
    pub hint_planning_ms: Option<f64>,
    pub hint_exec_ms: Option<f64>,
    pub solver_ms: Option<f64>,
    pub hint_honored: Option<bool>,
    pub exec_gain: Option<f64>,
    pub e2e_gain: Option<f64>,
    pub reduction_pct: Option<f64>,
    pub error: String,
}

impl ReportRow {
    pub fn success(b: &LatencyBreakdown, g: &GainRow) -> Self {
        Self {
            query: b.query.clone(),
            pg_planning_ms: Some(b.pg_planning_ms),
            pg_exec_ms: Some(b.pg_execution_ms),
            hint_planning_ms: Some(b.hint_planning_ms),
            hint_exec_ms: Some(b.hint_execution_ms),
            solver_ms: Some(b.solver_ms),
            hint_honored: Some(b.hint_honored),
            exec_gain: Some(g.exec_gain),
            e2e_gain: Some(g.e2e_gain),
            reduction_pct: Some(g.reduction_pct),
            error: String::new(),
        }
    }

    pub fn failure(query: impl Into<String>, error: impl fmt::Display) -> Self {
        Self {
            query: query.into(),
            pg_planning_ms: None,
            pg_exec_ms: None,
            hint_planning_ms: None,
            hint_exec_ms: None,
            solver_ms: None,
            hint_honored: None,
            exec_gain: None,
            e2e_gain: None,
            reduction_pct: None,
            error: error.to_string(),
        }
    }

    /// Timings, when the row is a success.
    pub fn breakdown(&self) -> Option<LatencyBreakdown> {
        if !self.error.is_empty() {
            return None;
        }
        Some(LatencyBreakdown {
            query: self.query.clone(),
            pg_planning_ms: self.pg_planning_ms?,
            pg_execution_ms: self.pg_exec_ms?,
            hint_planning_ms: self.hint_planning_ms?,
            hint_execution_ms: self.hint_exec_ms?,
            solver_ms: self.solver_ms?,
            hint_honored: self.hint_honored.unwrap_or(false),
        })
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[ReportRow]) -> Result<(), ReportError> {
    let io = |e: csv::Error| ReportError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(',')).map_err(io)?;
    }
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush().map_err(|e| ReportError::Io(e.to_string()))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ReportRow>, ReportError> {
    let malformed = |e: csv::Error| ReportError::MalformedCsv(e.to_string());
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(malformed)?.clone();
    let missing: Vec<&str> = CSV_HEADER
        .split(',')
        .filter(|c| !headers.iter().any(|h| h == *c))
        .collect();
    if !missing.is_empty() {
        return Err(ReportError::MalformedCsv(format!(
            "missing column(s) {}",
            missing.join(", ")
        )));
    }
    r.deserialize().map(|row| row.map_err(malformed)).collect()
}

/// A successful row with its recomputed gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartEntry {
    pub breakdown: LatencyBreakdown,
    pub gains: GainRow,
}

/// Successful rows with gains recomputed from the timing columns, sorted by
/// execution gain (descending) then query id.
pub fn chart_entries(rows: &[ReportRow]) -> Result<Vec<ChartEntry>, ReportError> {
    let mut out = Vec::new();
    for (line, row) in rows.iter().enumerate() {
        if !row.error.is_empty() {
            continue;
        }
        let breakdown = row.breakdown().ok_or_else(|| {
            ReportError::MalformedCsv(format!(
                "row {} (`{}`) has no error but is missing timings",
                line + 2,
                row.query
            ))
        })?;
        let gains = compute_gains(&breakdown)
            .map_err(|e| ReportError::MalformedCsv(format!("row {}: {e}", line + 2)))?;
        out.push(ChartEntry { breakdown, gains });
    }
    out.sort_by(|a, b| {
        b.gains
            .exec_gain
            .partial_cmp(&a.gains.exec_gain)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.gains.query.cmp(&b.gains.query))
    });
    Ok(out)
}

const BAR_WIDTH: f64 = 28.0;
const GROUP_GAP: f64 = 24.0;
const PLOT_HEIGHT: f64 = 300.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const BASELINE_FILL: &str = "#4e79a7";
const HINTED_FILL: &str = "#f28e2b";

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Grouped bars of baseline and hinted execution time per query.
pub fn render_svg(entries: &[ChartEntry]) -> String {
    let group = 2.0 * BAR_WIDTH + GROUP_GAP;
    let width = MARGIN_LEFT + group * entries.len().max(1) as f64 + GROUP_GAP + 160.0;
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;
    let peak = entries
        .iter()
        .map(|e| {
            e.breakdown
                .pg_execution_ms
                .max(e.breakdown.hint_execution_ms)
        })
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let y_of = |ms: f64| MARGIN_TOP + PLOT_HEIGHT * (1.0 - ms / peak);
    let axis_y = MARGIN_TOP + PLOT_HEIGHT;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN_LEFT}" y="20" font-size="14">Execution time per query: PostgreSQL vs hinted (ms)</text>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{axis_y}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN_LEFT}" y1="{axis_y}" x2="{:.1}" y2="{axis_y}" stroke="black"/>"#,
        width - 160.0
    );
    for tick in 0..=4 {
        let ms = peak * tick as f64 / 4.0;
        let y = y_of(ms);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{ms:.0}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
    }
    for (i, e) in entries.iter().enumerate() {
        let x0 = MARGIN_LEFT + GROUP_GAP + group * i as f64;
        let q = escape(&e.gains.query);
        let _ = writeln!(s, r#"<g class="query" data-query="{q}">"#);
        for (k, (class, fill, ms)) in [
            ("baseline", BASELINE_FILL, e.breakdown.pg_execution_ms),
            ("hinted", HINTED_FILL, e.breakdown.hint_execution_ms),
        ]
        .into_iter()
        .enumerate()
        {
            let y = y_of(ms);
            let _ = writeln!(
                s,
                r#"<rect class="{class}" x="{:.1}" y="{y:.1}" width="{BAR_WIDTH}" height="{:.1}" fill="{fill}"><title>{q} {class}: {ms:.2} ms</title></rect>"#,
                x0 + BAR_WIDTH * k as f64,
                axis_y - y
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{q}</text>"#,
            x0 + BAR_WIDTH,
            axis_y + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.2}x</text>"#,
            x0 + BAR_WIDTH,
            axis_y + 32.0,
            e.gains.exec_gain
        );
        let _ = writeln!(s, "</g>");
    }
    let lx = width - 150.0;
    for (k, (label, fill)) in [("PostgreSQL", BASELINE_FILL), ("hinted", HINTED_FILL)]
        .into_iter()
        .enumerate()
    {
        let y = MARGIN_TOP + 20.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{y:.1}" width="12" height="12" fill="{fill}"/><text x="{:.1}" y="{:.1}">{label}</text>"#,
            lx + 18.0,
            y + 10.0
        );
    }
    s.push_str("</svg>\n");
    s
}
