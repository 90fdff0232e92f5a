//! Join-order instances: relations with row estimates, join predicates with
//! selectivities, and the JSON instance file they are loaded from.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Largest relation count a graph may hold (subsets are 64-bit masks).
pub const MAX_RELATIONS: usize = 64;

/// Largest relation count for which the exact left-deep oracle runs.
pub const ORACLE_LIMIT: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("malformed instance: {0}")]
    MalformedInput(String),
    #[error("duplicate alias `{0}`")]
    DuplicateAlias(String),
    #[error("join references unknown alias `{0}`")]
    UnknownAlias(String),
    #[error("alias `{0}` is not a plain identifier")]
    InvalidAlias(String),
    #[error("selectivity {selectivity} on {left}-{right} is outside (0, 1]")]
    BadSelectivity {
        left: String,
        right: String,
        selectivity: f64,
    },
    #[error("join {0}-{0} relates an alias to itself")]
    SelfJoin(String),
    #[error("instance has no relations")]
    EmptyGraph,
    #[error("instance has {0} relations; at most {MAX_RELATIONS} are supported")]
    TooManyRelations(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relation<T> {
    pub alias: String,
    pub table: String,
    /// Estimated rows, always >= 1.
    pub cardinality: T,
}

/// Join predicate between two relations, stored by relation position.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinEdge<T> {
    pub left: usize,
    pub right: usize,
    pub selectivity: T,
}

/// Validated join-order instance. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinGraph<T> {
    name: String,
    sql: Option<String>,
    relations: Vec<Relation<T>>,
    edges: Vec<JoinEdge<T>>,
    /// Per relation: (neighbor position, selectivity).
    adjacency: Vec<Vec<(usize, T)>>,
}

/// Returns true when `alias` matches `[a-zA-Z_][a-zA-Z0-9_]*`.
pub fn is_plain_identifier(alias: &str) -> bool {
    let mut chars = alias.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl<T: Scalar> JoinGraph<T> {
    /// Builds a graph from raw parts. Cardinalities below 1 are clamped to 1 and
    /// repeated predicates on the same alias pair are merged by multiplying
    /// their selectivities.
    pub fn new(
        name: impl Into<String>,
        sql: Option<String>,
        relations: Vec<(String, String, f64)>,
        joins: Vec<(String, String, f64)>,
    ) -> Result<Self, GraphError> {
        if relations.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        if relations.len() > MAX_RELATIONS {
            return Err(GraphError::TooManyRelations(relations.len()));
        }

        let mut position = HashMap::with_capacity(relations.len());
        let mut rels = Vec::with_capacity(relations.len());
        for (i, (alias, table, card)) in relations.into_iter().enumerate() {
            if !is_plain_identifier(&alias) {
                return Err(GraphError::InvalidAlias(alias));
            }
            if card.is_nan() || card == f64::INFINITY {
                return Err(GraphError::MalformedInput(format!(
                    "cardinality of `{alias}` is not finite"
                )));
            }
            if position.insert(alias.clone(), i).is_some() {
                return Err(GraphError::DuplicateAlias(alias));
            }
            rels.push(Relation {
                alias,
                table,
                cardinality: T::of(card.max(1.0)),
            });
        }

        let mut merged: Vec<(usize, usize, f64)> = Vec::new();
        let mut pair_slot: HashMap<(usize, usize), usize> = HashMap::new();
        for (left, right, sel) in joins {
            let l = *position
                .get(&left)
                .ok_or_else(|| GraphError::UnknownAlias(left.clone()))?;
            let r = *position
                .get(&right)
                .ok_or_else(|| GraphError::UnknownAlias(right.clone()))?;
            if l == r {
                return Err(GraphError::SelfJoin(left));
            }
            if !(sel > 0.0 && sel <= 1.0) {
                return Err(GraphError::BadSelectivity {
                    left,
                    right,
                    selectivity: sel,
                });
            }
            let key = (l.min(r), l.max(r));
            match pair_slot.get(&key) {
                Some(&slot) => merged[slot].2 *= sel,
                None => {
                    pair_slot.insert(key, merged.len());
                    merged.push((l, r, sel));
                }
            }
        }

        let edges: Vec<JoinEdge<T>> = merged
            .into_iter()
            .map(|(left, right, sel)| JoinEdge {
                left,
                right,
                selectivity: T::of(sel),
            })
            .collect();
        let mut adjacency = vec![Vec::new(); rels.len()];
        for e in &edges {
            adjacency[e.left].push((e.right, e.selectivity));
            adjacency[e.right].push((e.left, e.selectivity));
        }

        Ok(Self {
            name: name.into(),
            sql,
            relations: rels,
            edges,
            adjacency,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sql(&self) -> Option<&str> {
        self.sql.as_deref()
    }

    pub fn relations(&self) -> &[Relation<T>] {
        &self.relations
    }

    pub fn edges(&self) -> &[JoinEdge<T>] {
        &self.edges
    }

    /// Relation count.
    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn alias(&self, position: usize) -> &str {
        &self.relations[position].alias
    }

    pub fn aliases(&self) -> impl Iterator<Item = &str> {
        self.relations.iter().map(|r| r.alias.as_str())
    }

    pub fn position(&self, alias: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.alias == alias)
    }

    pub fn neighbors(&self, position: usize) -> &[(usize, T)] {
        &self.adjacency[position]
    }

    /// Selectivity of the predicate between two positions, if any.
    pub fn selectivity(&self, a: usize, b: usize) -> Option<T> {
        self.adjacency[a]
            .iter()
            .find(|(n, _)| *n == b)
            .map(|&(_, s)| s)
    }

    /// Rank of each position when aliases are sorted lexicographically.
    pub fn alias_ranks(&self) -> Vec<usize> {
        let mut by_alias: Vec<usize> = (0..self.len()).collect();
        by_alias.sort_by(|&a, &b| self.alias(a).cmp(self.alias(b)));
        let mut rank = vec![0; self.len()];
        for (r, p) in by_alias.into_iter().enumerate() {
            rank[p] = r;
        }
        rank
    }

    /// Maps an alias sequence to positions.
    pub fn positions_of<S: AsRef<str>>(&self, aliases: &[S]) -> Option<Vec<usize>> {
        aliases.iter().map(|a| self.position(a.as_ref())).collect()
    }

    pub fn aliases_of(&self, positions: &[usize]) -> Vec<String> {
        positions
            .iter()
            .map(|&p| self.alias(p).to_string())
            .collect()
    }

    /// Same instance with a different relation cardinality (used after a
    /// catalog refresh). Values below 1 are clamped.
    pub fn with_cardinality(&self, alias: &str, rows: f64) -> Option<Self> {
        let p = self.position(alias)?;
        let mut g = self.clone();
        g.relations[p].cardinality = T::of(rows.max(1.0));
        Some(g)
    }

    /// Canonical JSON: relations sorted by alias, each join written with the
    /// smaller alias on the left, joins sorted by alias pair.
    pub fn to_canonical_json(&self) -> String {
        let mut relations: Vec<RelationRecord> = self
            .relations
            .iter()
            .map(|r| RelationRecord {
                alias: r.alias.clone(),
                table: r.table.clone(),
                cardinality: r.cardinality.as_f64(),
            })
            .collect();
        relations.sort_by(|a, b| a.alias.cmp(&b.alias));
        let mut joins: Vec<JoinRecord> = self
            .edges
            .iter()
            .map(|e| {
                let (a, b) = (self.alias(e.left), self.alias(e.right));
                let (left, right) = if a <= b { (a, b) } else { (b, a) };
                JoinRecord {
                    left: left.to_string(),
                    right: right.to_string(),
                    selectivity: e.selectivity.as_f64(),
                }
            })
            .collect();
        joins.sort_by(|a, b| (&a.left, &a.right).cmp(&(&b.left, &b.right)));
        let file = InstanceFile {
            name: self.name.clone(),
            sql: self.sql.clone(),
            relations,
            joins,
        };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RelationRecord {
    alias: String,
    table: String,
    cardinality: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct JoinRecord {
    left: String,
    right: String,
    selectivity: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sql: Option<String>,
    relations: Vec<RelationRecord>,
    #[serde(default)]
    joins: Vec<JoinRecord>,
}

/// Parses an instance file.
pub fn parse_join_graph<T: Scalar>(text: &str) -> Result<JoinGraph<T>, GraphError> {
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|e| GraphError::MalformedInput(e.to_string()))?;
    JoinGraph::new(
        file.name,
        file.sql,
        file.relations
            .into_iter()
            .map(|r| (r.alias, r.table, r.cardinality))
            .collect(),
        file.joins
            .into_iter()
            .map(|j| (j.left, j.right, j.selectivity))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    /// Some relations can only be combined through a cross product.
    Disconnected {
        components: usize,
    },
    /// Too many relations for the exact oracles.
    OracleUnavailable {
        relations: usize,
    },
    MissingSql,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::Disconnected { components } => write!(
                f,
                "disconnected: cross product required ({components} components)"
            ),
            Warning::OracleUnavailable { .. } => {
                write!(f, "oracle unavailable above n={ORACLE_LIMIT}")
            }
            Warning::MissingSql => write!(f, "missing sql text"),
        }
    }
}

/// Non-fatal findings about a parsed instance.
pub fn validate<T: Scalar>(graph: &JoinGraph<T>) -> Vec<Warning> {
    let mut warnings = Vec::new();
    let components = connected_components(graph).len();
    if components > 1 {
        warnings.push(Warning::Disconnected { components });
    }
    if graph.len() > ORACLE_LIMIT {
        warnings.push(Warning::OracleUnavailable {
            relations: graph.len(),
        });
    }
    if graph.sql().is_none() {
        warnings.push(Warning::MissingSql);
    }
    warnings
}

/// Maximal edge-connected groups of aliases. Groups appear in order of their
/// first relation; aliases inside a group keep relation order.
pub fn connected_components<T: Scalar>(graph: &JoinGraph<T>) -> Vec<Vec<String>> {
    let n = graph.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in graph.edges() {
        let (a, b) = (find(&mut parent, e.left), find(&mut parent, e.right));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: Vec<(usize, Vec<String>)> = Vec::new();
    for p in 0..n {
        let root = find(&mut parent, p);
        match groups.iter_mut().find(|(r, _)| *r == root) {
            Some((_, g)) => g.push(graph.alias(p).to_string()),
            None => groups.push((root, vec![graph.alias(p).to_string()])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}
