//! `pg_hint_plan` `Leading` hints.
//!
//! Grammar:
//!
//! ```text
//! hint  := "/*+ Leading(" node ") */"
//! node  := alias | "(" node " " node ")"
//! alias := [a-zA-Z_][a-zA-Z0-9_]*
//! ```

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::joingraph::is_plain_identifier;

const PREFIX: &str = "/*+ Leading(";
const SUFFIX: &str = ") */";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HintError {
    #[error("a join hint needs at least two relations")]
    TooFewRelations,
    #[error("malformed hint at byte {at}: {reason}")]
    Malformed { at: usize, reason: String },
    #[error("sql text is empty")]
    EmptySql,
}

/// Binary join tree; the left child is the outer side.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum JoinTree {
    Leaf(String),
    Join(Box<JoinTree>, Box<JoinTree>),
}

impl JoinTree {
    pub fn leaf(alias: impl Into<String>) -> Self {
        JoinTree::Leaf(alias.into())
    }

    pub fn join(left: JoinTree, right: JoinTree) -> Self {
        JoinTree::Join(Box::new(left), Box::new(right))
    }

    /// Leaves from left to right.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            JoinTree::Leaf(a) => out.push(a),
            JoinTree::Join(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            JoinTree::Leaf(_) => 1,
            JoinTree::Join(l, r) => l.leaf_count() + r.leaf_count(),
        }
    }

    pub fn is_left_deep(&self) -> bool {
        match self {
            JoinTree::Leaf(_) => true,
            JoinTree::Join(l, r) => matches!(**r, JoinTree::Leaf(_)) && l.is_left_deep(),
        }
    }
}

impl fmt::Display for JoinTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JoinTree::Leaf(a) => f.write_str(a),
            JoinTree::Join(l, r) => write!(f, "({l} {r})"),
        }
    }
}

/// Left-deep tree `((a1 a2) a3) ... an`.
pub fn order_to_tree<S: AsRef<str>>(order: &[S]) -> Result<JoinTree, HintError> {
    if order.len() < 2 {
        return Err(HintError::TooFewRelations);
    }
    let mut it = order.iter().map(|a| JoinTree::leaf(a.as_ref()));
    let first = it.next().expect("len >= 2");
    Ok(it.fold(first, JoinTree::join))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanHint {
    pub text: String,
    pub tree: JoinTree,
}

pub fn emit_leading_hint(tree: &JoinTree) -> Result<PlanHint, HintError> {
    if tree.leaf_count() < 2 {
        return Err(HintError::TooFewRelations);
    }
    Ok(PlanHint {
        text: format!("{PREFIX}{tree}{SUFFIX}"),
        tree: tree.clone(),
    })
}

pub fn parse_leading_hint(text: &str) -> Result<JoinTree, HintError> {
    let body = text
        .strip_prefix(PREFIX)
        .ok_or_else(|| malformed(0, "expected `/*+ Leading(`"))?;
    let mut p = Parser {
        src: body.as_bytes(),
        pos: 0,
        base: PREFIX.len(),
    };
    let tree = p.node()?;
    if &body[p.pos..] != SUFFIX {
        return Err(malformed(
            p.base + p.pos,
            "expected `) */` to close the hint",
        ));
    }
    if tree.leaf_count() < 2 {
        return Err(HintError::TooFewRelations);
    }
    let mut seen = HashSet::new();
    if let Some(dup) = tree.leaves().into_iter().find(|a| !seen.insert(*a)) {
        return Err(malformed(0, &format!("alias `{dup}` appears twice")));
    }
    Ok(tree)
}

fn malformed(at: usize, reason: &str) -> HintError {
    HintError::Malformed {
        at,
        reason: reason.to_string(),
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    base: usize,
}

impl Parser<'_> {
    fn expect(&mut self, byte: u8) -> Result<(), HintError> {
        if self.src.get(self.pos) == Some(&byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(malformed(
                self.base + self.pos,
                &format!("expected `{}`", byte as char),
            ))
        }
    }

    fn node(&mut self) -> Result<JoinTree, HintError> {
        if self.src.get(self.pos) == Some(&b'(') {
            self.pos += 1;
            let left = self.node()?;
            self.expect(b' ')?;
            let right = self.node()?;
            self.expect(b')')?;
            Ok(JoinTree::join(left, right))
        } else {
            let start = self.pos;
            while self
                .src
                .get(self.pos)
                .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
            {
                self.pos += 1;
            }
            let alias = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
            if !is_plain_identifier(alias) {
                return Err(malformed(self.base + start, "expected an alias"));
            }
            Ok(JoinTree::leaf(alias))
        }
    }
}

/// Places the hint comment on its own line ahead of the statement.
pub fn prepend_hint(sql: &str, hint: &PlanHint) -> Result<String, HintError> {
    let body = sql.trim_start();
    if body.trim_end().is_empty() {
        return Err(HintError::EmptySql);
    }
    Ok(format!("{}\n{}", hint.text, body))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> JoinTree {
        JoinTree::leaf(s)
    }

    #[test]
    fn left_deep_fold() {
        assert_eq!(
            order_to_tree(&["a", "b"]).unwrap(),
            JoinTree::join(t("a"), t("b"))
        );
        let tree = order_to_tree(&["ci", "t", "mc"]).unwrap();
        assert_eq!(tree.to_string(), "((ci t) mc)");
        assert!(tree.is_left_deep());
        assert_eq!(order_to_tree(&["a"]), Err(HintError::TooFewRelations));
    }

    #[test]
    fn emission() {
        let h = emit_leading_hint(&JoinTree::join(t("a"), t("b"))).unwrap();
        assert_eq!(h.text, "/*+ Leading((a b)) */");
        let h = emit_leading_hint(&order_to_tree(&["ci", "t", "mc"]).unwrap()).unwrap();
        assert_eq!(h.text, "/*+ Leading(((ci t) mc)) */");
        let bushy = JoinTree::join(
            JoinTree::join(t("a"), t("b")),
            JoinTree::join(t("c"), t("d")),
        );
        assert!(!bushy.is_left_deep());
        assert_eq!(
            emit_leading_hint(&bushy).unwrap().text,
            "/*+ Leading(((a b) (c d))) */"
        );
        assert_eq!(emit_leading_hint(&t("a")), Err(HintError::TooFewRelations));
    }

    #[test]
    fn parsing() {
        let tree = parse_leading_hint("/*+ Leading(((ci t) mc)) */").unwrap();
        assert_eq!(tree, order_to_tree(&["ci", "t", "mc"]).unwrap());
        for bad in [
            "/*+ Leading((a b) */",
            "/*+ Leading((a b)) ",
            "Leading((a b))",
            "/*+ Leading((a  b)) */",
            "/*+ Leading((a b c)) */",
            "/*+ Leading((a 1b)) */",
            "/*+ Leading((a a)) */",
            "/*+ Leading((a b))) */",
            "/*+ Leading(()) */",
        ] {
            assert!(
                matches!(parse_leading_hint(bad), Err(HintError::Malformed { .. })),
                "{bad}"
            );
        }
        assert_eq!(
            parse_leading_hint("/*+ Leading(a) */"),
            Err(HintError::TooFewRelations)
        );
        let h = "/*+ Leading(((a b) (c d))) */";
        assert_eq!(
            emit_leading_hint(&parse_leading_hint(h).unwrap())
                .unwrap()
                .text,
            h
        );
    }

    #[test]
    fn prepending() {
        let hint = emit_leading_hint(&order_to_tree(&["a", "b"]).unwrap()).unwrap();
        assert_eq!(
            prepend_hint("SELECT 1;", &hint).unwrap(),
            "/*+ Leading((a b)) */\nSELECT 1;"
        );
        assert_eq!(
            prepend_hint("  \n\tSELECT 1;", &hint).unwrap(),
            "/*+ Leading((a b)) */\nSELECT 1;"
        );
        assert_eq!(prepend_hint("", &hint), Err(HintError::EmptySql));
        assert_eq!(prepend_hint("   \n", &hint), Err(HintError::EmptySql));
    }
}
