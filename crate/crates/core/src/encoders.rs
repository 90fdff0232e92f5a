//! Solver-facing encodings of a join-order instance.
//!
//! [`PermutationModel`] keeps the order as a permutation and evaluates it with
//! either cost function. [`Qubo`] is a one-hot binary model over variables
//! `x[r, s]` (relation `r` placed at sequence position `s`), whose energy on
//! a permutation matrix equals the log-product surrogate and whose constraint
//! penalty outweighs any cost difference.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::costmodel::{cout_of_positions, logproduct_of_positions, order_positions, CostError};
use crate::joingraph::JoinGraph;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("instance has no relations")]
    EmptyGraph,
    #[error("a QUBO needs at least two relations, got {0}")]
    TooSmall(usize),
    #[error("assignment has {got} bits, model has {expected} variables")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    #[default]
    Cout,
    LogProduct,
}

/// Join order as a permutation of relation positions.
#[derive(Debug, Clone, Copy)]
pub struct PermutationModel<'g, T> {
    graph: &'g JoinGraph<T>,
    objective: Objective,
}

pub fn build_nl_model<T: Scalar>(
    graph: &JoinGraph<T>,
    objective: Objective,
) -> Result<PermutationModel<'_, T>, EncodeError> {
    if graph.is_empty() {
        return Err(EncodeError::EmptyGraph);
    }
    Ok(PermutationModel { graph, objective })
}

impl<'g, T: Scalar> PermutationModel<'g, T> {
    pub fn graph(&self) -> &'g JoinGraph<T> {
        self.graph
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    /// Objective of a permutation of positions. Caller guarantees validity.
    pub fn evaluate_positions(&self, positions: &[usize]) -> T {
        match self.objective {
            Objective::Cout => cout_of_positions(self.graph, positions),
            Objective::LogProduct => logproduct_of_positions(self.graph, positions),
        }
    }

    pub fn evaluate<S: AsRef<str>>(&self, order: &[S]) -> Result<T, EncodeError> {
        let positions = order_positions(self.graph, order)?;
        Ok(self.evaluate_positions(&positions))
    }
}

/// Bits aligned with [`Qubo::index`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryAssignment(pub Vec<bool>);

impl BinaryAssignment {
    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bit pattern of the `k`-th assignment in binary counting order.
    pub fn from_bits(bits: u64, len: usize) -> Self {
        Self((0..len).map(|i| bits >> i & 1 == 1).collect())
    }
}

/// Binary quadratic model `offset + sum_i a_i x_i + sum_{i<j} b_ij x_i x_j`.
#[derive(Debug, Clone)]
pub struct Qubo<T> {
    n: usize,
    aliases: Vec<String>,
    linear: Vec<T>,
    quadratic: BTreeMap<(usize, usize), T>,
    offset: T,
    penalty: T,
    /// Per variable: (other variable, coupling).
    couplings: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> Qubo<T> {
    /// Relation count.
    pub fn relations(&self) -> usize {
        self.n
    }

    pub fn n_vars(&self) -> usize {
        self.n * self.n
    }

    /// Variable for relation position `relation` at sequence position `slot`.
    pub fn index(&self, relation: usize, slot: usize) -> usize {
        relation * self.n + slot
    }

    pub fn aliases(&self) -> &[String] {
        &self.aliases
    }

    pub fn linear(&self) -> &[T] {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), T> {
        &self.quadratic
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn penalty(&self) -> T {
        self.penalty
    }

    pub fn couplings(&self, var: usize) -> &[(usize, T)] {
        &self.couplings[var]
    }

    /// One-hot assignment of a permutation of relation positions.
    pub fn encode(&self, positions: &[usize]) -> BinaryAssignment {
        let mut x = BinaryAssignment::zeros(self.n_vars());
        for (slot, &r) in positions.iter().enumerate() {
            x.0[self.index(r, slot)] = true;
        }
        x
    }

    /// Text dump: `# offset`, `# penalty`, then `i j coeff` lines with i <= j
    /// (i = j for linear terms), in index order.
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# offset {}", self.offset);
        let _ = writeln!(out, "# penalty {}", self.penalty);
        let mut terms: Vec<(usize, usize, T)> = self
            .linear
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, &c)| (i, i, c))
            .collect();
        terms.extend(self.quadratic.iter().map(|(&(i, j), &c)| (i, j, c)));
        terms.sort_by_key(|&(i, j, _)| (i, j));
        for (i, j, c) in terms {
            let _ = writeln!(out, "{i} {j} {c}");
        }
        out
    }
}

struct QuboBuilder<T> {
    linear: Vec<T>,
    quadratic: BTreeMap<(usize, usize), T>,
    offset: T,
}

impl<T: Scalar> QuboBuilder<T> {
    fn add(&mut self, i: usize, j: usize, c: T) {
        if i == j {
            // x * x = x for binary x
            self.linear[i] = self.linear[i] + c;
        } else {
            let key = (i.min(j), i.max(j));
            let slot = self.quadratic.entry(key).or_insert_with(T::zero);
            *slot = *slot + c;
        }
    }

    /// Adds `weight * (1 - sum(vars))^2`.
    fn add_exactly_one(&mut self, vars: &[usize], weight: T) {
        self.offset = self.offset + weight;
        for (k, &i) in vars.iter().enumerate() {
            // -2x + x^2 = -x
            self.linear[i] = self.linear[i] - weight;
            for &j in &vars[k + 1..] {
                self.add(i, j, weight + weight);
            }
        }
    }
}

/// Penalty weight `n * (sum_r w_r + sum_e |w_e|) + 1` with `w = log2(statistic)`.
pub fn penalty_weight<T: Scalar>(graph: &JoinGraph<T>) -> T {
    let n = T::of(graph.len() as f64);
    let rel: T = graph.relations().iter().map(|r| r.cardinality.log2()).sum();
    let edge: T = graph
        .edges()
        .iter()
        .map(|e| e.selectivity.log2().abs())
        .sum();
    n * (rel + edge) + T::one()
}

/// One-hot QUBO whose energy on valid assignments is the log-product surrogate.
pub fn build_qubo<T: Scalar>(graph: &JoinGraph<T>) -> Result<Qubo<T>, EncodeError> {
    let n = graph.len();
    if n == 0 {
        return Err(EncodeError::EmptyGraph);
    }
    if n < 2 {
        return Err(EncodeError::TooSmall(n));
    }
    let idx = |r: usize, s: usize| r * n + s;
    let mut b = QuboBuilder {
        linear: vec![T::zero(); n * n],
        quadratic: BTreeMap::new(),
        offset: T::zero(),
    };

    // Cost: for every prefix ending at s >= 1, prefix membership of r is
    // X[r, s] = sum_{t <= s} x[r, t].
    for s in 1..n {
        for (r, rel) in graph.relations().iter().enumerate() {
            let w = rel.cardinality.log2();
            for t in 0..=s {
                b.add(idx(r, t), idx(r, t), w);
            }
        }
        for e in graph.edges() {
            let w = e.selectivity.log2();
            for t in 0..=s {
                for u in 0..=s {
                    b.add(idx(e.left, t), idx(e.right, u), w);
                }
            }
        }
    }

    let penalty = penalty_weight(graph);
    for r in 0..n {
        let row: Vec<usize> = (0..n).map(|s| idx(r, s)).collect();
        b.add_exactly_one(&row, penalty);
    }
    for s in 0..n {
        let column: Vec<usize> = (0..n).map(|r| idx(r, s)).collect();
        b.add_exactly_one(&column, penalty);
    }

    b.quadratic.retain(|_, c| !c.is_zero());
    let mut couplings = vec![Vec::new(); n * n];
    for (&(i, j), &c) in &b.quadratic {
        couplings[i].push((j, c));
        couplings[j].push((i, c));
    }

    Ok(Qubo {
        n,
        aliases: graph.aliases().map(str::to_string).collect(),
        linear: b.linear,
        quadratic: b.quadratic,
        offset: b.offset,
        penalty,
        couplings,
    })
}

pub fn qubo_energy<T: Scalar>(qubo: &Qubo<T>, x: &BinaryAssignment) -> Result<T, EncodeError> {
    if x.len() != qubo.n_vars() {
        return Err(EncodeError::LengthMismatch {
            expected: qubo.n_vars(),
            got: x.len(),
        });
    }
    let mut e = qubo.offset;
    for (i, &c) in qubo.linear.iter().enumerate() {
        if x.0[i] {
            e = e + c;
        }
    }
    for (&(i, j), &c) in &qubo.quadratic {
        if x.0[i] && x.0[j] {
            e = e + c;
        }
    }
    Ok(e)
}

/// A row constraint ("relation appears exactly once") that does not hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowViolation {
    pub alias: String,
    /// Positions the relation was assigned to.
    pub slots: Vec<usize>,
}

/// A column constraint ("position holds exactly one relation") that does not hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnViolation {
    pub slot: usize,
    /// Relations claiming this position.
    pub claimants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ViolationReport {
    pub rows: Vec<RowViolation>,
    pub columns: Vec<ColumnViolation>,
}

impl ViolationReport {
    pub fn count(&self) -> usize {
        self.rows.len() + self.columns.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    Order(Vec<String>),
    Violations(ViolationReport),
}

/// Reads a permutation matrix back into an alias order.
pub fn decode<T: Scalar>(qubo: &Qubo<T>, x: &BinaryAssignment) -> Result<Decoded, EncodeError> {
    if x.len() != qubo.n_vars() {
        return Err(EncodeError::LengthMismatch {
            expected: qubo.n_vars(),
            got: x.len(),
        });
    }
    let n = qubo.n;
    let mut report = ViolationReport::default();
    for r in 0..n {
        let slots: Vec<usize> = (0..n).filter(|&s| x.0[qubo.index(r, s)]).collect();
        if slots.len() != 1 {
            report.rows.push(RowViolation {
                alias: qubo.aliases[r].clone(),
                slots,
            });
        }
    }
    let mut order = Vec::with_capacity(n);
    for s in 0..n {
        let claimants: Vec<usize> = (0..n).filter(|&r| x.0[qubo.index(r, s)]).collect();
        if claimants.len() == 1 {
            order.push(qubo.aliases[claimants[0]].clone());
        } else {
            report.columns.push(ColumnViolation {
                slot: s,
                claimants: claimants.iter().map(|&r| qubo.aliases[r].clone()).collect(),
            });
        }
    }
    if report.count() == 0 {
        Ok(Decoded::Order(order))
    } else {
        Ok(Decoded::Violations(report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmodel::plan_cost_logproduct;
    use crate::testing::{chain3, pair};

    #[test]
    fn nl_model_delegates() {
        let g = chain3();
        let m = build_nl_model(&g, Objective::Cout).unwrap();
        assert!((m.evaluate(&["A", "B", "C"]).unwrap() - 200.0).abs() < 1e-9);
        let m = build_nl_model(&g, Objective::LogProduct).unwrap();
        assert!((m.evaluate(&["A", "B", "C"]).unwrap() - 13.2877).abs() < 1e-4);
        assert!(matches!(
            m.evaluate(&["A"]),
            Err(EncodeError::Cost(CostError::NotAPermutation))
        ));

        let one: JoinGraph<f64> =
            JoinGraph::new("one", None, vec![("A".into(), "a".into(), 5.0)], vec![]).unwrap();
        let m = build_nl_model(&one, Objective::Cout).unwrap();
        assert_eq!(m.evaluate(&["A"]).unwrap(), 0.0);
    }

    #[test]
    fn pair_energies() {
        let g = pair();
        let q = build_qubo(&g).unwrap();
        assert_eq!(q.n_vars(), 4);
        for order in [[0, 1], [1, 0]] {
            let e = qubo_energy(&q, &q.encode(&order)).unwrap();
            assert!((e - 100f64.log2()).abs() < 1e-9, "{e}");
        }
        let zero = qubo_energy(&q, &BinaryAssignment::zeros(4)).unwrap();
        assert!((zero - 4.0 * q.penalty()).abs() < 1e-9);
        assert_eq!(zero, q.offset());
    }

    #[test]
    fn chain3_penalty_and_energy() {
        let g = chain3();
        let q = build_qubo(&g).unwrap();
        let rel = 10f64.log2() + 100f64.log2() + 20f64.log2();
        let edge = 10f64.log2() + 20f64.log2();
        assert!((rel - 14.2877).abs() < 1e-4 && (edge - 7.6439).abs() < 1e-4);
        assert!((q.penalty() - (3.0 * (rel + edge) + 1.0)).abs() < 1e-9);
        assert!((q.penalty() - 66.795).abs() < 1e-3);

        let e = qubo_energy(&q, &q.encode(&[0, 1, 2])).unwrap();
        let lp = plan_cost_logproduct(&g, &["A", "B", "C"]).unwrap();
        assert!((e - lp).abs() < 1e-9 * lp);
    }

    #[test]
    fn no_diagonal_quadratics() {
        let q = build_qubo(&chain3()).unwrap();
        assert!(q.quadratic().keys().all(|&(i, j)| i < j));
    }

    #[test]
    fn qubo_errors() {
        let one: JoinGraph<f64> =
            JoinGraph::new("one", None, vec![("A".into(), "a".into(), 5.0)], vec![]).unwrap();
        assert_eq!(build_qubo(&one).unwrap_err(), EncodeError::TooSmall(1));
        let q = build_qubo(&pair()).unwrap();
        assert_eq!(
            qubo_energy(&q, &BinaryAssignment::zeros(3)).unwrap_err(),
            EncodeError::LengthMismatch {
                expected: 4,
                got: 3
            }
        );
    }

    #[test]
    fn decode_valid_and_invalid() {
        let q = build_qubo(&chain3()).unwrap();
        assert_eq!(
            decode(&q, &q.encode(&[0, 1, 2])).unwrap(),
            Decoded::Order(vec!["A".into(), "B".into(), "C".into()])
        );

        let Decoded::Violations(report) = decode(&q, &BinaryAssignment::zeros(9)).unwrap() else {
            panic!("all-zeros must not decode");
        };
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.columns.len(), 3);

        // A and B both at position 0, C at position 2
        let mut x = BinaryAssignment::zeros(9);
        x.0[q.index(0, 0)] = true;
        x.0[q.index(1, 0)] = true;
        x.0[q.index(2, 2)] = true;
        let Decoded::Violations(report) = decode(&q, &x).unwrap() else {
            panic!("collision must not decode");
        };
        assert!(report.rows.is_empty());
        assert_eq!(
            report.columns,
            vec![
                ColumnViolation {
                    slot: 0,
                    claimants: vec!["A".into(), "B".into()]
                },
                ColumnViolation {
                    slot: 1,
                    claimants: vec![]
                },
            ]
        );
    }

    #[test]
    fn dump_format() {
        let q = build_qubo(&pair()).unwrap();
        let dump = q.to_dump();
        let mut lines = dump.lines();
        assert!(lines.next().unwrap().starts_with("# offset "));
        assert!(lines.next().unwrap().starts_with("# penalty "));
        for line in lines {
            let parts: Vec<&str> = line.split(' ').collect();
            assert_eq!(parts.len(), 3);
            let i: usize = parts[0].parse().unwrap();
            let j: usize = parts[1].parse().unwrap();
            assert!(i <= j && j < 4);
            parts[2].parse::<f64>().unwrap();
        }
    }
}
