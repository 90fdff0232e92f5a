use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    accept, elapsed_ms, initial_temperature, restart_seed, run_restarts, Solution, SolverConfig,
    SolverError,
};
use crate::costmodel::RelationSubset;
use crate::encoders::{Objective, PermutationModel};
use crate::joingraph::JoinGraph;
use crate::scalar::Scalar;

const AUTO_SAMPLES: usize = 100;

/// Incremental prefix-product evaluation used inside the search loop.
struct FastCost<'g, T> {
    graph: &'g JoinGraph<T>,
    objective: Objective,
    ranks: Vec<usize>,
}

impl<T: Scalar> FastCost<'_, T> {
    /// Strictly better cost, or equal cost and alias-lexicographically smaller.
    fn better(&self, cost: T, order: &[usize], than_cost: T, than: &[usize]) -> bool {
        cost < than_cost
            || (cost == than_cost
                && order
                    .iter()
                    .map(|&p| self.ranks[p])
                    .lt(than.iter().map(|&p| self.ranks[p])))
    }

    fn eval(&self, perm: &[usize]) -> T {
        let mut rows = T::one();
        let mut prefix = RelationSubset::EMPTY;
        let mut total = T::zero();
        for (i, &p) in perm.iter().enumerate() {
            rows = rows * self.graph.relations()[p].cardinality;
            for &(q, sel) in self.graph.neighbors(p) {
                if prefix.contains(q) {
                    rows = rows * sel;
                }
            }
            prefix = prefix.with(p);
            if i >= 1 {
                total = total
                    + match self.objective {
                        Objective::Cout => rows,
                        Objective::LogProduct => rows.log2(),
                    };
            }
        }
        total
    }
}

#[derive(Debug, Clone, Copy)]
enum Move {
    AdjacentSwap(usize),
    Swap(usize, usize),
    /// Remove at the first index, reinsert at the second.
    Insert(usize, usize),
}

impl Move {
    fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        let distinct_pair = |rng: &mut R| {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        };
        match rng.gen_range(0..3) {
            0 => Move::AdjacentSwap(rng.gen_range(0..n - 1)),
            1 => {
                let (i, j) = distinct_pair(rng);
                Move::Swap(i, j)
            }
            _ => {
                let (i, j) = distinct_pair(rng);
                Move::Insert(i, j)
            }
        }
    }

    fn apply(self, perm: &mut Vec<usize>) {
        match self {
            Move::AdjacentSwap(i) => perm.swap(i, i + 1),
            Move::Swap(i, j) => perm.swap(i, j),
            Move::Insert(i, j) => {
                let v = perm.remove(i);
                perm.insert(j, v);
            }
        }
    }
}

struct RestartResult<T> {
    order: Vec<usize>,
    cost: T,
}

fn run_restart<T: Scalar>(
    fast: &FastCost<'_, T>,
    n: usize,
    config: &SolverConfig,
    seed: u64,
    deadline: Option<Instant>,
) -> RestartResult<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current: Vec<usize> = (0..n).collect();
    current.shuffle(&mut rng);
    let mut current_cost = fast.eval(&current);
    let mut best = RestartResult {
        order: current.clone(),
        cost: current_cost,
    };
    if n < 2 {
        return best;
    }

    let mut scratch = current.clone();
    let mean_abs = {
        let mut sum = 0.0;
        for _ in 0..AUTO_SAMPLES {
            scratch.clone_from(&current);
            Move::random(n, &mut rng).apply(&mut scratch);
            sum += (fast.eval(&scratch) - current_cost).as_f64().abs();
        }
        sum / AUTO_SAMPLES as f64
    };
    let mut temperature = initial_temperature(config, mean_abs);

    for _ in 0..config.sweeps {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        for _ in 0..n {
            scratch.clone_from(&current);
            Move::random(n, &mut rng).apply(&mut scratch);
            let cost = fast.eval(&scratch);
            if accept((cost - current_cost).as_f64(), temperature, &mut rng) {
                std::mem::swap(&mut current, &mut scratch);
                current_cost = cost;
                if fast.better(current_cost, &current, best.cost, &best.order) {
                    best.cost = current_cost;
                    best.order.clone_from(&current);
                }
            }
        }
        temperature *= config.cooling_alpha;
    }
    best
}

/// Multi-restart Metropolis search over permutations.
///
/// Restart `k` is seeded with `seed + k`. Equal costs go to the
/// alias-lexicographically smaller order, then to the lower restart index, so
/// the result does not depend on thread count.
pub fn solve_permutation_sa<T: Scalar>(
    model: &PermutationModel<'_, T>,
    config: &SolverConfig,
) -> Result<Solution<T>, SolverError> {
    config.validate()?;
    let n = model.len();
    if n == 0 {
        return Err(SolverError::EmptyGraph);
    }
    let start = Instant::now();
    let fast = FastCost {
        graph: model.graph(),
        objective: model.objective(),
        ranks: model.graph().alias_ranks(),
    };
    let results = run_restarts(config, |k, deadline| {
        run_restart(&fast, n, config, restart_seed(config.seed, k), deadline)
    });
    let restarts_used = results.len();
    let (_, best) = results
        .into_iter()
        .reduce(|a, b| {
            if fast.better(b.1.cost, &b.1.order, a.1.cost, &a.1.order) {
                b
            } else {
                a
            }
        })
        .expect("restart 0 always runs");
    Ok(Solution {
        objective: model.evaluate_positions(&best.order),
        order: model.graph().aliases_of(&best.order),
        wall_time_ms: elapsed_ms(start),
        solver_id: "sa-permutation".into(),
        restarts_used,
        valid: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::build_nl_model;
    use crate::testing::{chain3, pair};

    fn config(seed: u64, restarts: usize, sweeps: usize) -> SolverConfig {
        SolverConfig {
            restarts,
            sweeps,
            ..SolverConfig::defaults_for(3).with_seed(seed)
        }
    }

    #[test]
    fn chain3_reaches_optimum() {
        let g = chain3();
        let m = build_nl_model(&g, Objective::Cout).unwrap();
        let s = solve_permutation_sa(&m, &config(42, 4, 100)).unwrap();
        assert!((s.objective - 200.0).abs() < 1e-9);
        assert_eq!(s.restarts_used, 4);
        assert!(s.valid);
    }

    #[test]
    fn pair_and_single() {
        let g = pair();
        let m = build_nl_model(&g, Objective::Cout).unwrap();
        for seed in 0..10 {
            let s = solve_permutation_sa(&m, &config(seed, 1, 1)).unwrap();
            assert!((s.objective - 100.0).abs() < 1e-9);
        }

        let one: JoinGraph<f64> =
            JoinGraph::new("one", None, vec![("A".into(), "a".into(), 5.0)], vec![]).unwrap();
        let m = build_nl_model(&one, Objective::Cout).unwrap();
        let s = solve_permutation_sa(&m, &config(1, 3, 5)).unwrap();
        assert_eq!(s.order, vec!["A"]);
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn moves_keep_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut perm: Vec<usize> = (0..6).collect();
        for _ in 0..500 {
            Move::random(6, &mut rng).apply(&mut perm);
            let mut sorted = perm.clone();
            sorted.sort();
            assert_eq!(sorted, (0..6).collect::<Vec<_>>());
        }
    }

    #[test]
    fn fast_cost_matches_model() {
        let g = chain3();
        for objective in [Objective::Cout, Objective::LogProduct] {
            let m = build_nl_model(&g, objective).unwrap();
            let fast = FastCost {
                graph: &g,
                objective,
                ranks: g.alias_ranks(),
            };
            for perm in [[0, 1, 2], [2, 0, 1], [1, 2, 0]] {
                let a = fast.eval(&perm);
                let b = m.evaluate_positions(&perm);
                assert!(crate::scalar::approx_eq(a, b, 1e-12));
            }
        }
    }

    #[test]
    fn zero_sweeps_rejected() {
        let g = chain3();
        let m = build_nl_model(&g, Objective::Cout).unwrap();
        assert!(matches!(
            solve_permutation_sa(&m, &config(1, 1, 0)),
            Err(SolverError::Config(_))
        ));
    }
}
