//! Exact C_out oracles. Ties between equal-cost orders go to the
//! lexicographically smallest alias sequence.
//!
//! Costs are accumulated as an unevaluated sum `hi + lo` so that prefixes
//! whose costs differ by less than one ulp of the total still compare
//! correctly; otherwise rounding could make a pruned prefix tie at the top.

use std::cmp::Ordering;

use super::SolverError;
use crate::costmodel::{cardinality_unchecked, RelationSubset};
use crate::hints::JoinTree;
use crate::joingraph::{JoinGraph, ORACLE_LIMIT};
use crate::scalar::Scalar;

pub const EXHAUSTIVE_LIMIT: usize = 8;
pub const BUSHY_LIMIT: usize = 16;

/// Double-word sum, normalized so `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost<T> {
    hi: T,
    lo: T,
}

impl<T: Scalar> Cost<T> {
    fn zero() -> Self {
        Self {
            hi: T::zero(),
            lo: T::zero(),
        }
    }

    fn infinite() -> Self {
        Self {
            hi: T::infinity(),
            lo: T::zero(),
        }
    }

    fn add(self, x: T) -> Self {
        self.plus(Self {
            hi: x,
            lo: T::zero(),
        })
    }

    fn plus(self, other: Self) -> Self {
        if !self.hi.is_finite() || !other.hi.is_finite() {
            return Self {
                hi: self.hi + other.hi,
                lo: T::zero(),
            };
        }
        // two-sum on the leading words, then fold in the trailing words
        let s = self.hi + other.hi;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (other.hi - bb);
        let lo = err + self.lo + other.lo;
        let hi = s + lo;
        Self {
            hi,
            lo: lo - (hi - s),
        }
    }

    fn less(self, other: Self) -> bool {
        self.hi < other.hi || (self.hi == other.hi && self.lo < other.lo)
    }
}

/// Left-fold of prefix cardinalities, same accumulation as the DP.
fn order_cost<T: Scalar>(graph: &JoinGraph<T>, positions: &[usize]) -> Cost<T> {
    let mut subset = RelationSubset::EMPTY;
    let mut cost = Cost::zero();
    for (i, &p) in positions.iter().enumerate() {
        subset = subset.with(p);
        if i >= 1 {
            cost = cost.add(cardinality_unchecked(graph, subset));
        }
    }
    cost
}

/// Optimal left-deep order by dynamic programming over relation subsets.
pub fn dp_leftdeep<T: Scalar>(graph: &JoinGraph<T>) -> Result<(Vec<String>, T), SolverError> {
    let n = graph.len();
    if n == 0 {
        return Err(SolverError::EmptyGraph);
    }
    if n > ORACLE_LIMIT {
        return Err(SolverError::TooLarge {
            n,
            limit: ORACLE_LIMIT,
        });
    }
    let rank = graph.alias_ranks();
    let size = 1usize << n;
    let mut cost = vec![Cost::<T>::infinite(); size];
    // Best prefix order of each subset, as relation positions, n slots per subset.
    let mut seq = vec![0u8; size * n];

    for s in 1..size {
        let subset = RelationSubset(s as u64);
        let k = subset.len();
        if k == 1 {
            cost[s] = Cost::zero();
            seq[s * n] = s.trailing_zeros() as u8;
            continue;
        }
        let card = cardinality_unchecked(graph, subset);
        let mut best: Option<(usize, usize, Cost<T>)> = None;
        for last in subset.iter() {
            let prev = subset.without(last).0 as usize;
            let c = cost[prev].add(card);
            let better = match best {
                None => true,
                Some((bp, bl, bc)) => {
                    c.less(bc)
                        || (c == bc
                            && compare_extended(&seq, n, &rank, (prev, last), (bp, bl), k)
                                == Ordering::Less)
                }
            };
            if better {
                best = Some((prev, last, c));
            }
        }
        let (prev, last, c) = best.expect("subset has members");
        cost[s] = c;
        seq.copy_within(prev * n..prev * n + k - 1, s * n);
        seq[s * n + k - 1] = last as u8;
    }

    let full = size - 1;
    let order: Vec<usize> = seq[full * n..full * n + n]
        .iter()
        .map(|&p| p as usize)
        .collect();
    Ok((graph.aliases_of(&order), cost[full].hi))
}

/// Compares `seq(prev_a) + last_a` with `seq(prev_b) + last_b` by alias rank.
fn compare_extended(
    seq: &[u8],
    n: usize,
    rank: &[usize],
    (prev_a, last_a): (usize, usize),
    (prev_b, last_b): (usize, usize),
    k: usize,
) -> Ordering {
    let at = |prev: usize, last: usize, i: usize| {
        if i + 1 == k {
            rank[last]
        } else {
            rank[seq[prev * n + i] as usize]
        }
    };
    (0..k)
        .map(|i| at(prev_a, last_a, i).cmp(&at(prev_b, last_b, i)))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Minimum-C_out order over all permutations, enumerated in lexicographic
/// alias order.
pub fn exhaustive<T: Scalar>(graph: &JoinGraph<T>) -> Result<(Vec<String>, T), SolverError> {
    let n = graph.len();
    if n == 0 {
        return Err(SolverError::EmptyGraph);
    }
    if n > EXHAUSTIVE_LIMIT {
        return Err(SolverError::TooLarge {
            n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&a, &b| graph.alias(a).cmp(graph.alias(b)));
    let mut best = (perm.clone(), order_cost(graph, &perm));
    while next_permutation(&mut perm, |a, b| graph.alias(*a).cmp(graph.alias(*b))) {
        let c = order_cost(graph, &perm);
        if c.less(best.1) {
            best = (perm.clone(), c);
        }
    }
    Ok((graph.aliases_of(&best.0), best.1.hi))
}

fn next_permutation<V>(v: &mut [V], cmp: impl Fn(&V, &V) -> Ordering) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && cmp(&v[i - 1], &v[i]) != Ordering::Less {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while cmp(&v[j], &v[i - 1]) != Ordering::Greater {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Optimal bushy join tree by dynamic programming over subset splits.
pub fn dp_bushy<T: Scalar>(graph: &JoinGraph<T>) -> Result<(JoinTree, T), SolverError> {
    let n = graph.len();
    if n == 0 {
        return Err(SolverError::EmptyGraph);
    }
    if n < 2 {
        return Err(SolverError::TooSmall { n, min: 2 });
    }
    if n > BUSHY_LIMIT {
        return Err(SolverError::TooLarge {
            n,
            limit: BUSHY_LIMIT,
        });
    }
    let size = 1usize << n;
    let mut cost = vec![Cost::<T>::zero(); size];
    let mut split = vec![0usize; size];
    for s in 1..size {
        if s.count_ones() < 2 {
            continue;
        }
        let card = cardinality_unchecked(graph, RelationSubset(s as u64));
        let mut best: Option<(usize, Cost<T>)> = None;
        // Proper nonempty submasks, largest first.
        let mut left = (s - 1) & s;
        while left > 0 {
            let c = cost[left].plus(cost[s ^ left]).add(card);
            if best.is_none_or(|(_, bc)| c.less(bc)) {
                best = Some((left, c));
            }
            left = (left - 1) & s;
        }
        let (l, c) = best.expect("at least two members");
        cost[s] = c;
        split[s] = l;
    }
    fn build<T: Scalar>(graph: &JoinGraph<T>, split: &[usize], s: usize) -> JoinTree {
        if s.count_ones() == 1 {
            JoinTree::leaf(graph.alias(s.trailing_zeros() as usize))
        } else {
            let l = split[s];
            JoinTree::join(build(graph, split, l), build(graph, split, s ^ l))
        }
    }
    let full = size - 1;
    Ok((build(graph, &split, full), cost[full].hi))
}

/// C_out of an arbitrary join tree: the sum of every join's output size.
/// `None` when a leaf is not an alias of the graph or repeats.
pub fn tree_cout<T: Scalar>(graph: &JoinGraph<T>, tree: &JoinTree) -> Option<T> {
    fn walk<T: Scalar>(
        graph: &JoinGraph<T>,
        tree: &JoinTree,
        total: &mut T,
    ) -> Option<RelationSubset> {
        match tree {
            JoinTree::Leaf(a) => graph.position(a).map(RelationSubset::singleton),
            JoinTree::Join(l, r) => {
                let (ls, rs) = (walk(graph, l, total)?, walk(graph, r, total)?);
                if ls.0 & rs.0 != 0 {
                    return None;
                }
                let s = ls.union(rs);
                *total = *total + cardinality_unchecked(graph, s);
                Some(s)
            }
        }
    }
    let mut total = T::zero();
    walk(graph, tree, &mut total)?;
    Some(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hints::order_to_tree;
    use crate::testing::{chain3, pair};

    #[test]
    fn chain3_oracles() {
        let g = chain3();
        let (order, cost) = dp_leftdeep(&g).unwrap();
        assert_eq!(order, vec!["A", "B", "C"]);
        assert!((cost - 200.0).abs() < 1e-9);
        let (order, cost) = exhaustive(&g).unwrap();
        assert_eq!(order, vec!["A", "B", "C"]);
        assert!((cost - 200.0).abs() < 1e-9);
        let (tree, cost) = dp_bushy(&g).unwrap();
        assert!((cost - 200.0).abs() < 1e-9);
        assert!((tree_cout(&g, &tree).unwrap() - cost).abs() < 1e-9);
    }

    #[test]
    fn pair_oracles() {
        let g = pair();
        let (order, cost) = dp_leftdeep(&g).unwrap();
        assert_eq!(order, vec!["A", "B"]);
        assert!((cost - 100.0).abs() < 1e-9);
        let (tree, cost) = dp_bushy(&g).unwrap();
        assert_eq!(tree.leaf_count(), 2);
        assert!((cost - 100.0).abs() < 1e-9);
    }

    #[test]
    fn single_relation_and_limits() {
        let one: JoinGraph<f64> =
            JoinGraph::new("one", None, vec![("A".into(), "a".into(), 5.0)], vec![]).unwrap();
        assert_eq!(dp_leftdeep(&one).unwrap(), (vec!["A".to_string()], 0.0));
        assert_eq!(exhaustive(&one).unwrap(), (vec!["A".to_string()], 0.0));
        assert_eq!(
            dp_bushy(&one).unwrap_err(),
            SolverError::TooSmall { n: 1, min: 2 }
        );

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        use rand_chacha::rand_core::SeedableRng;
        let nine: JoinGraph<f64> =
            crate::testing::random_graph(&mut rng, 9, crate::testing::Topology::Chain);
        assert_eq!(
            exhaustive(&nine).unwrap_err(),
            SolverError::TooLarge { n: 9, limit: 8 }
        );
        let big: JoinGraph<f64> =
            crate::testing::random_graph(&mut rng, 21, crate::testing::Topology::Chain);
        assert_eq!(
            dp_leftdeep(&big).unwrap_err(),
            SolverError::TooLarge { n: 21, limit: 20 }
        );
        let seventeen: JoinGraph<f64> =
            crate::testing::random_graph(&mut rng, 17, crate::testing::Topology::Chain);
        assert!(matches!(
            dp_bushy(&seventeen),
            Err(SolverError::TooLarge { .. })
        ));
    }

    #[test]
    fn uniform_clique_bushy_not_worse() {
        let g: JoinGraph<f64> = JoinGraph::new(
            "clique4",
            None,
            ["A", "B", "C", "D"]
                .iter()
                .map(|a| (a.to_string(), a.to_lowercase(), 1000.0))
                .collect(),
            [
                ("A", "B"),
                ("A", "C"),
                ("A", "D"),
                ("B", "C"),
                ("B", "D"),
                ("C", "D"),
            ]
            .iter()
            .map(|(l, r)| (l.to_string(), r.to_string(), 0.01))
            .collect(),
        )
        .unwrap();
        let (_, left) = dp_leftdeep(&g).unwrap();
        let (_, bushy) = dp_bushy(&g).unwrap();
        assert!(bushy <= left * (1.0 + 1e-12));
    }

    #[test]
    fn tree_cout_matches_left_deep() {
        let g = chain3();
        let t = order_to_tree(&["A", "C", "B"]).unwrap();
        assert!((tree_cout(&g, &t).unwrap() - 300.0).abs() < 1e-9);
        let bad = JoinTree::join(JoinTree::leaf("A"), JoinTree::leaf("A"));
        assert_eq!(tree_cout(&g, &bad), None);
    }

    #[test]
    fn compensated_sum_keeps_small_differences() {
        let big = Cost::zero().add(1e17f64);
        let a = big.add(3.0);
        let b = big.add(5.0);
        assert_eq!(a.hi, b.hi);
        assert!(a.less(b) && !b.less(a));
        assert_eq!(Cost::zero().add(2.0f64).add(3.0).hi, 5.0);
    }

    #[test]
    fn permutation_stepping() {
        let mut v = vec![1, 2, 3];
        let mut seen = vec![v.clone()];
        while next_permutation(&mut v, |a, b| a.cmp(b)) {
            seen.push(v.clone());
        }
        assert_eq!(seen.len(), 6);
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
    }
}
