//! Small fixed instances and seeded random instance generators, shared by the
//! test suites and the benchmark tooling.

use rand::Rng;

use crate::joingraph::JoinGraph;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Chain,
    Star,
    Clique,
    /// Random spanning tree plus extra edges with probability 0.3.
    Random,
}

impl Topology {
    pub const ALL: [Topology; 4] = [
        Topology::Chain,
        Topology::Star,
        Topology::Clique,
        Topology::Random,
    ];
}

/// A, B, ..., Z, then t26, t27, ...
pub fn alias_for(i: usize) -> String {
    if i < 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        format!("t{i}")
    }
}

fn build<T: Scalar>(name: &str, cards: &[f64], joins: &[(usize, usize, f64)]) -> JoinGraph<T> {
    JoinGraph::new(
        name,
        None,
        cards
            .iter()
            .enumerate()
            .map(|(i, &c)| (alias_for(i), alias_for(i).to_lowercase(), c))
            .collect(),
        joins
            .iter()
            .map(|&(l, r, s)| (alias_for(l), alias_for(r), s))
            .collect(),
    )
    .expect("generated instance is valid")
}

/// A(10) - B(100) - C(20) with selectivities 0.1 and 0.05.
pub fn chain3_as<T: Scalar>() -> JoinGraph<T> {
    build("chain3", &[10.0, 100.0, 20.0], &[(0, 1, 0.1), (1, 2, 0.05)])
}

pub fn chain3() -> JoinGraph<f64> {
    chain3_as()
}

/// A(10) - B(100) with selectivity 0.1.
pub fn pair() -> JoinGraph<f64> {
    build("pair", &[10.0, 100.0], &[(0, 1, 0.1)])
}

fn log_uniform<R: Rng>(rng: &mut R, lo_exp: f64, hi_exp: f64) -> f64 {
    10f64.powf(rng.gen_range(lo_exp..=hi_exp))
}

/// Connected instance with cardinalities log-uniform in [1, 1e6] and
/// selectivities log-uniform in [1e-4, 1].
pub fn random_graph<T: Scalar, R: Rng>(rng: &mut R, n: usize, topology: Topology) -> JoinGraph<T> {
    let cards: Vec<f64> = (0..n).map(|_| log_uniform(rng, 0.0, 6.0)).collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    match topology {
        Topology::Chain => pairs.extend((1..n).map(|i| (i - 1, i))),
        Topology::Star => pairs.extend((1..n).map(|i| (0, i))),
        Topology::Clique => {
            for i in 0..n {
                for j in i + 1..n {
                    pairs.push((i, j));
                }
            }
        }
        Topology::Random => {
            for i in 1..n {
                pairs.push((rng.gen_range(0..i), i));
            }
            for i in 0..n {
                for j in i + 1..n {
                    if !pairs.contains(&(i, j)) && rng.gen_bool(0.3) {
                        pairs.push((i, j));
                    }
                }
            }
        }
    }
    let joins: Vec<(usize, usize, f64)> = pairs
        .into_iter()
        .map(|(l, r)| (l, r, log_uniform(rng, -4.0, 0.0)))
        .collect();
    build(&format!("{topology:?}{n}").to_lowercase(), &cards, &joins)
}
