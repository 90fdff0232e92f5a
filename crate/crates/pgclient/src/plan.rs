use serde_json::Value;

use crate::{PgError, TimedRun};

fn document(text: &str) -> Result<Value, PgError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| PgError::Parse(e.to_string()))?;
    // EXPLAIN (FORMAT JSON) returns a one-element array
    match doc {
        Value::Array(mut items) if !items.is_empty() => Ok(items.swap_remove(0)),
        Value::Object(_) => Ok(doc),
        _ => Err(PgError::Parse("expected a JSON array with one plan".into())),
    }
}

fn millis(top: &Value, field: &str) -> Result<f64, PgError> {
    let v = top
        .get(field)
        .and_then(Value::as_f64)
        .ok_or_else(|| PgError::Parse(format!("missing \"{field}\"")))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(PgError::Parse(format!("\"{field}\" is {v}")))
    }
}

/// Reads "Planning Time" and "Execution Time" from an EXPLAIN ANALYZE document.
pub fn parse_explain(text: &str) -> Result<TimedRun, PgError> {
    let top = document(text)?;
    Ok(TimedRun {
        planning_ms: millis(&top, "Planning Time")?,
        execution_ms: millis(&top, "Execution Time")?,
        plan_text: text.to_string(),
    })
}

/// Scanned relation aliases in plan order (outer before inner), skipping
/// init plans and subplans.
pub fn plan_leaf_aliases(text: &str) -> Result<Vec<String>, PgError> {
    let top = document(text)?;
    let plan = top
        .get("Plan")
        .ok_or_else(|| PgError::Parse("missing \"Plan\"".into()))?;
    let mut out = Vec::new();
    walk(plan, &mut out);
    Ok(out)
}

fn walk(node: &Value, out: &mut Vec<String>) {
    if let Some(alias) = node.get("Alias").and_then(Value::as_str) {
        out.push(alias.to_string());
    }
    let Some(children) = node.get("Plans").and_then(Value::as_array) else {
        return;
    };
    for child in children {
        let relationship = child.get("Parent Relationship").and_then(Value::as_str);
        if matches!(relationship, Some("InitPlan") | Some("SubPlan")) {
            continue;
        }
        walk(child, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timings() {
        let run = parse_explain(
            r#"[{"Plan":{"Node Type":"Result"},"Planning Time": 1.00, "Execution Time": 3581.40}]"#,
        )
        .unwrap();
        assert_eq!(run.planning_ms, 1.00);
        assert_eq!(run.execution_ms, 3581.40);
    }

    #[test]
    fn missing_fields() {
        assert!(matches!(
            parse_explain(r#"[{"Plan":{},"Planning Time": 1.0}]"#),
            Err(PgError::Parse(m)) if m.contains("Execution Time")
        ));
        assert!(matches!(parse_explain("not json"), Err(PgError::Parse(_))));
        assert!(matches!(parse_explain("[]"), Err(PgError::Parse(_))));
        assert!(matches!(
            parse_explain(r#"[{"Planning Time": -1, "Execution Time": 2}]"#),
            Err(PgError::Parse(_))
        ));
    }

    #[test]
    fn leaf_order_follows_outer_then_inner() {
        let text = r#"[{"Plan":{"Node Type":"Aggregate","Plans":[
            {"Node Type":"Hash Join","Parent Relationship":"Outer","Plans":[
                {"Node Type":"Nested Loop","Parent Relationship":"Outer","Plans":[
                    {"Node Type":"Seq Scan","Relation Name":"cast_info","Alias":"ci","Parent Relationship":"Outer"},
                    {"Node Type":"Index Scan","Relation Name":"title","Alias":"t","Parent Relationship":"Inner"}]},
                {"Node Type":"Hash","Parent Relationship":"Inner","Plans":[
                    {"Node Type":"Bitmap Heap Scan","Alias":"mc","Parent Relationship":"Outer","Plans":[
                        {"Node Type":"Bitmap Index Scan","Parent Relationship":"Outer"}]}]}]},
            {"Node Type":"Seq Scan","Alias":"kt","Parent Relationship":"InitPlan"}]},
            "Planning Time":2.24,"Execution Time":272.35}]"#;
        assert_eq!(plan_leaf_aliases(text).unwrap(), vec!["ci", "t", "mc"]);
    }
}
