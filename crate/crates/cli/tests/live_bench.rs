use std::collections::VecDeque;
use std::path::Path;

use q2o_cli::bench::{finish, run_bench, Source};
use q2o_cli::BenchArgs;
use q2o_pgclient::{PgError, Session};

/// Answers every EXPLAIN with the same plan, which ignores any hint.
struct NoHintPlan {
    explains: VecDeque<String>,
    statements: Vec<String>,
}

impl Session for NoHintPlan {
    fn query_text(&mut self, statement: &str) -> Result<String, PgError> {
        self.statements.push(statement.to_string());
        self.explains.pop_front().ok_or(PgError::Timeout)
    }

    fn query_reltuples(&mut self, _: &str, _: &str) -> Result<Option<f64>, PgError> {
        Ok(Some(1000.0))
    }

    fn execute(&mut self, statement: &str) -> Result<(), PgError> {
        self.statements.push(format!("EXEC {statement}"));
        Ok(())
    }
}

fn plan(exec: f64) -> String {
    format!(
        r#"[{{"Plan":{{"Node Type":"Hash Join","Plans":[{{"Alias":"mc"}},{{"Alias":"t"}},{{"Alias":"ci"}}]}},"Planning Time":1.0,"Execution Time":{exec}}}]"#
    )
}

fn args(warmup: bool) -> BenchArgs {
    let workload = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/workload");
    BenchArgs {
        workload: Some(workload),
        fixtures: None,
        output: None,
        warmup,
        no_warmup: !warmup,
        refresh_cardinalities: true,
        solve: Default::default(),
    }
}

#[test]
fn degraded_mode_flags_ignored_hints() {
    // q21 gets both runs; every later query times out on its first EXPLAIN.
    let mut s = NoHintPlan {
        explains: [plan(100.0), plan(90.0)].into_iter().collect(),
        statements: Vec::new(),
    };
    let rows = run_bench(&args(true), Source::Live(&mut s)).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].query, "q21");
    assert_eq!(rows[0].hint_honored, Some(false));
    assert_eq!(rows[0].error, "");
    assert!(rows[1..]
        .iter()
        .all(|r| r.error == "statement exceeded statement_timeout"));

    assert!(s.statements[0].starts_with("EXEC SELECT count(*)"));
    assert!(s.statements[1].starts_with("EXPLAIN (ANALYZE, FORMAT JSON) SELECT"));
    assert!(s.statements[2].starts_with("EXPLAIN (ANALYZE, FORMAT JSON) /*+ Leading("));

    let summary = finish(&rows, None).unwrap();
    assert!(summary.any_success);
    assert!(summary.text.contains("queries 1, improved 1"));
}

#[test]
fn no_warmup_skips_untimed_run() {
    let mut s = NoHintPlan {
        explains: [plan(100.0), plan(90.0)].into_iter().collect(),
        statements: Vec::new(),
    };
    run_bench(&args(false), Source::Live(&mut s)).unwrap();
    assert!(!s.statements.iter().any(|st| st.starts_with("EXEC")));
}
