//! Cardinality estimation under predicate independence, and the two plan
//! objectives built on it: C_out (sum of intermediate sizes) and the
//! log-product surrogate that the QUBO encoding optimizes.

use thiserror::Error;

use crate::joingraph::JoinGraph;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CostError {
    #[error("relation subset is empty")]
    EmptySubset,
    #[error("join order is not a permutation of the graph's relations")]
    NotAPermutation,
}

/// Set of relation positions, one bit per position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct RelationSubset(pub u64);

impl RelationSubset {
    pub const EMPTY: Self = Self(0);

    pub fn full(n: usize) -> Self {
        if n >= 64 {
            Self(u64::MAX)
        } else {
            Self((1u64 << n) - 1)
        }
    }

    pub fn singleton(position: usize) -> Self {
        Self(1u64 << position)
    }

    pub fn from_positions(positions: impl IntoIterator<Item = usize>) -> Self {
        Self(positions.into_iter().fold(0, |m, p| m | (1u64 << p)))
    }

    pub fn contains(self, position: usize) -> bool {
        self.0 >> position & 1 == 1
    }

    pub fn with(self, position: usize) -> Self {
        Self(self.0 | (1u64 << position))
    }

    pub fn without(self, position: usize) -> Self {
        Self(self.0 & !(1u64 << position))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let p = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(p)
            }
        })
    }
}

/// Product of member cardinalities times the selectivity of every predicate
/// with both endpoints inside the subset.
pub fn estimate_cardinality<T: Scalar>(
    graph: &JoinGraph<T>,
    subset: RelationSubset,
) -> Result<T, CostError> {
    if subset.is_empty() {
        return Err(CostError::EmptySubset);
    }
    Ok(cardinality_unchecked(graph, subset))
}

pub(crate) fn cardinality_unchecked<T: Scalar>(graph: &JoinGraph<T>, subset: RelationSubset) -> T {
    let mut rows = T::one();
    for p in subset.iter() {
        rows = rows * graph.relations()[p].cardinality;
    }
    for e in graph.edges() {
        if subset.contains(e.left) && subset.contains(e.right) {
            rows = rows * e.selectivity;
        }
    }
    rows
}

/// Checks that `order` lists every alias exactly once and maps it to positions.
pub fn order_positions<T: Scalar, S: AsRef<str>>(
    graph: &JoinGraph<T>,
    order: &[S],
) -> Result<Vec<usize>, CostError> {
    let positions = graph
        .positions_of(order)
        .ok_or(CostError::NotAPermutation)?;
    check_permutation(graph.len(), &positions)?;
    Ok(positions)
}

pub(crate) fn check_permutation(n: usize, positions: &[usize]) -> Result<(), CostError> {
    if positions.len() != n {
        return Err(CostError::NotAPermutation);
    }
    let mut seen = RelationSubset::EMPTY;
    for &p in positions {
        if p >= n || seen.contains(p) {
            return Err(CostError::NotAPermutation);
        }
        seen = seen.with(p);
    }
    Ok(())
}

/// Cardinality of every prefix of length 2..=n, computed from scratch per prefix.
fn prefix_cardinalities<T: Scalar>(graph: &JoinGraph<T>, positions: &[usize]) -> Vec<T> {
    let mut subset = RelationSubset::EMPTY;
    let mut out = Vec::with_capacity(positions.len().saturating_sub(1));
    for (i, &p) in positions.iter().enumerate() {
        subset = subset.with(p);
        if i >= 1 {
            out.push(cardinality_unchecked(graph, subset));
        }
    }
    out
}

/// C_out of a left-deep order given as alias names.
pub fn plan_cost_cout<T: Scalar, S: AsRef<str>>(
    graph: &JoinGraph<T>,
    order: &[S],
) -> Result<T, CostError> {
    let positions = order_positions(graph, order)?;
    Ok(cout_of_positions(graph, &positions))
}

/// Log-product surrogate of a left-deep order given as alias names.
pub fn plan_cost_logproduct<T: Scalar, S: AsRef<str>>(
    graph: &JoinGraph<T>,
    order: &[S],
) -> Result<T, CostError> {
    let positions = order_positions(graph, order)?;
    Ok(logproduct_of_positions(graph, &positions))
}

/// C_out over positions. Caller guarantees a permutation.
pub fn cout_of_positions<T: Scalar>(graph: &JoinGraph<T>, positions: &[usize]) -> T {
    prefix_cardinalities(graph, positions)
        .into_iter()
        .fold(T::zero(), |acc, c| acc + c)
}

/// Sum of log2 prefix cardinalities over positions. Caller guarantees a permutation.
pub fn logproduct_of_positions<T: Scalar>(graph: &JoinGraph<T>, positions: &[usize]) -> T {
    prefix_cardinalities(graph, positions)
        .into_iter()
        .fold(T::zero(), |acc, c| acc + c.log2())
}

/// Whether the left-deep order ever joins a relation that has no predicate
/// to the relations before it.
pub fn has_cross_product<T: Scalar>(graph: &JoinGraph<T>, positions: &[usize]) -> bool {
    let mut prefix = RelationSubset::EMPTY;
    for (i, &p) in positions.iter().enumerate() {
        if i > 0 && !graph.neighbors(p).iter().any(|&(q, _)| prefix.contains(q)) {
            return true;
        }
        prefix = prefix.with(p);
    }
    false
}
