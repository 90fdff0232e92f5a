use std::cmp::Reverse;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    accept, best_of, elapsed_ms, initial_temperature, restart_seed, run_restarts, Solution,
    SolverConfig, SolverError,
};
use crate::costmodel::logproduct_of_positions;
use crate::encoders::{build_qubo, decode, qubo_energy, BinaryAssignment, Decoded, Qubo};
use crate::joingraph::JoinGraph;
use crate::scalar::Scalar;

const AUTO_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct QuboSample<T> {
    pub assignment: BinaryAssignment,
    pub energy: T,
    pub restarts_used: usize,
    pub wall_time_ms: f64,
}

struct Walker<'q, T> {
    qubo: &'q Qubo<T>,
    x: Vec<bool>,
    /// Local field: linear term plus couplings to set bits.
    field: Vec<T>,
    energy: T,
}

impl<'q, T: Scalar> Walker<'q, T> {
    fn new(qubo: &'q Qubo<T>, x: Vec<bool>) -> Self {
        let field = (0..qubo.n_vars())
            .map(|i| {
                qubo.couplings(i)
                    .iter()
                    .filter(|(j, _)| x[*j])
                    .fold(qubo.linear()[i], |acc, &(_, c)| acc + c)
            })
            .collect();
        let energy = qubo_energy(qubo, &BinaryAssignment(x.clone())).expect("length checked");
        Self {
            qubo,
            x,
            field,
            energy,
        }
    }

    fn delta(&self, i: usize) -> T {
        if self.x[i] {
            -self.field[i]
        } else {
            self.field[i]
        }
    }

    fn flip(&mut self, i: usize, delta: T) {
        self.x[i] = !self.x[i];
        self.energy = self.energy + delta;
        let on = self.x[i];
        for &(j, c) in self.qubo.couplings(i) {
            self.field[j] = if on {
                self.field[j] + c
            } else {
                self.field[j] - c
            };
        }
    }
}

fn run_restart<T: Scalar>(
    qubo: &Qubo<T>,
    config: &SolverConfig,
    seed: u64,
    deadline: Option<Instant>,
) -> (BinaryAssignment, T) {
    let vars = qubo.n_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<bool> = (0..vars).map(|_| rng.gen_bool(0.5)).collect();
    let mut walker = Walker::new(qubo, start);
    let mut best = (walker.x.clone(), walker.energy);

    let mean_abs = (0..AUTO_SAMPLES)
        .map(|_| walker.delta(rng.gen_range(0..vars)).as_f64().abs())
        .sum::<f64>()
        / AUTO_SAMPLES as f64;
    let mut temperature = initial_temperature(config, mean_abs);

    for _ in 0..config.sweeps {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        for _ in 0..vars {
            let i = rng.gen_range(0..vars);
            let delta = walker.delta(i);
            if accept(delta.as_f64(), temperature, &mut rng) {
                walker.flip(i, delta);
                if walker.energy < best.1 {
                    best.0.clone_from(&walker.x);
                    best.1 = walker.energy;
                }
            }
        }
        temperature *= config.cooling_alpha;
    }
    (BinaryAssignment(best.0), best.1)
}

/// Single-bit-flip Metropolis sampler with incremental energy deltas.
pub fn solve_qubo_sa<T: Scalar>(
    qubo: &Qubo<T>,
    config: &SolverConfig,
) -> Result<QuboSample<T>, SolverError> {
    config.validate()?;
    let start = Instant::now();
    let results = run_restarts(config, |k, deadline| {
        run_restart(qubo, config, restart_seed(config.seed, k), deadline)
    });
    let restarts_used = results.len();
    let (_, (assignment, _)) = best_of(results, |r| r.1);
    let energy = qubo_energy(qubo, &assignment)?;
    Ok(QuboSample {
        assignment,
        energy,
        restarts_used,
        wall_time_ms: elapsed_ms(start),
    })
}

/// Turns any assignment into a permutation. Feasible assignments decode
/// unchanged; otherwise each position in turn takes the unplaced relation with
/// its bit set there, preferring the lexicographically smallest alias.
pub fn repair<T: Scalar>(qubo: &Qubo<T>, x: &BinaryAssignment) -> Result<Vec<String>, SolverError> {
    if let Decoded::Order(order) = decode(qubo, x)? {
        return Ok(order);
    }
    let n = qubo.relations();
    let aliases = qubo.aliases();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for s in 0..n {
        let r = (0..n)
            .filter(|&r| !placed[r])
            .max_by_key(|&r| (x.0[qubo.index(r, s)], Reverse(aliases[r].as_str())))
            .expect("one relation left per remaining position");
        placed[r] = true;
        order.push(aliases[r].clone());
    }
    Ok(order)
}

/// Build the QUBO, sample it, repair the best sample and score the order by
/// the log-product surrogate.
pub fn solve_qubo_pipeline<T: Scalar>(
    graph: &JoinGraph<T>,
    config: &SolverConfig,
) -> Result<Solution<T>, SolverError> {
    let start = Instant::now();
    let qubo = build_qubo(graph)?;
    let sample = solve_qubo_sa(&qubo, config)?;
    let valid = matches!(decode(&qubo, &sample.assignment)?, Decoded::Order(_));
    let order = repair(&qubo, &sample.assignment)?;
    let positions = graph
        .positions_of(&order)
        .expect("repair yields graph aliases");
    Ok(Solution {
        objective: logproduct_of_positions(graph, &positions),
        order,
        wall_time_ms: elapsed_ms(start),
        solver_id: "sa-qubo".into(),
        restarts_used: sample.restarts_used,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{chain3, pair};

    #[test]
    fn walker_deltas_are_exact() {
        let q = build_qubo(&chain3()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut w = Walker::new(&q, (0..9).map(|_| rng.gen_bool(0.5)).collect());
        for _ in 0..200 {
            let i = rng.gen_range(0..9);
            let d = w.delta(i);
            w.flip(i, d);
            let exact = qubo_energy(&q, &BinaryAssignment(w.x.clone())).unwrap();
            assert!((w.energy - exact).abs() < 1e-9 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn pair_optimum() {
        let q = build_qubo(&pair()).unwrap();
        for seed in 0..5 {
            let mut c = SolverConfig::defaults_for(2).with_seed(seed);
            c.restarts = 4;
            let s = solve_qubo_sa(&q, &c).unwrap();
            assert!((s.energy - 100f64.log2()).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_sweeps_is_config_error() {
        let q = build_qubo(&pair()).unwrap();
        let mut c = SolverConfig::defaults_for(2);
        c.sweeps = 0;
        assert!(matches!(solve_qubo_sa(&q, &c), Err(SolverError::Config(_))));
    }

    #[test]
    fn repair_rules() {
        let q = build_qubo(&chain3()).unwrap();
        let valid = q.encode(&[2, 0, 1]);
        assert_eq!(repair(&q, &valid).unwrap(), vec!["C", "A", "B"]);
        assert_eq!(
            repair(&q, &BinaryAssignment::zeros(9)).unwrap(),
            vec!["A", "B", "C"]
        );

        let mut x = BinaryAssignment::zeros(9);
        x.0[q.index(0, 0)] = true;
        x.0[q.index(1, 0)] = true;
        x.0[q.index(1, 2)] = true;
        x.0[q.index(2, 1)] = true;
        assert_eq!(repair(&q, &x).unwrap(), vec!["A", "C", "B"]);

        let mut x = BinaryAssignment::zeros(9);
        x.0[q.index(0, 0)] = true;
        x.0[q.index(1, 0)] = true;
        assert_eq!(repair(&q, &x).unwrap(), vec!["A", "B", "C"]);
    }
}
