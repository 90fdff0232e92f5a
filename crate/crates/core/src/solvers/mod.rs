//! Annealing searches over both encodings, exact oracles, and the remote
//! solver boundary.

mod anneal;
mod oracles;
mod qubo_sa;
mod remote;

use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

pub use anneal::solve_permutation_sa;
pub use oracles::{dp_bushy, dp_leftdeep, exhaustive, tree_cout, BUSHY_LIMIT, EXHAUSTIVE_LIMIT};
pub use qubo_sa::{repair, solve_qubo_pipeline, solve_qubo_sa, QuboSample};
pub use remote::{
    remote_solve, LocalSolver, RemoteError, RemoteSolver, ReplayEntry, StubSolver,
    DEFAULT_SIMULATED_LATENCY_MS,
};

use crate::encoders::EncodeError;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("instance has no relations")]
    EmptyGraph,
    #[error("oracle unavailable above n={limit} (instance has {n} relations)")]
    TooLarge { n: usize, limit: usize },
    #[error("instance needs at least {min} relations, has {n}")]
    TooSmall { n: usize, min: usize },
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialTemperature {
    /// Mean |delta| over 100 random moves from the starting point.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub seed: u64,
    pub restarts: usize,
    /// Passes per restart. A pass proposes one move per relation (permutation
    /// search) or one flip per variable (QUBO search).
    pub sweeps: usize,
    pub t_initial: InitialTemperature,
    pub cooling_alpha: f64,
    /// Soft wall-clock cap, checked between sweeps.
    pub time_budget_ms: Option<u64>,
    /// Worker threads for restarts; `None` uses the global pool. Never
    /// changes the result.
    pub threads: Option<usize>,
}

impl SolverConfig {
    /// 16 restarts, 200·n sweeps, alpha 0.95, automatic initial temperature.
    pub fn defaults_for(n: usize) -> Self {
        Self {
            seed: 1,
            restarts: 16,
            sweeps: 200 * n.max(1),
            t_initial: InitialTemperature::Auto,
            cooling_alpha: 0.95,
            time_budget_ms: None,
            threads: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.restarts == 0 {
            return Err(SolverError::Config("restarts must be at least 1".into()));
        }
        if self.sweeps == 0 {
            return Err(SolverError::Config("sweeps must be at least 1".into()));
        }
        if !(self.cooling_alpha > 0.0 && self.cooling_alpha < 1.0) {
            return Err(SolverError::Config(format!(
                "cooling_alpha {} is outside (0, 1)",
                self.cooling_alpha
            )));
        }
        if let InitialTemperature::Fixed(t) = self.t_initial {
            if !(t > 0.0 && t.is_finite()) {
                return Err(SolverError::Config(format!(
                    "initial temperature {t} must be positive"
                )));
            }
        }
        if self.threads == Some(0) {
            return Err(SolverError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

/// A join order found by some solver.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub order: Vec<String>,
    /// In the model's objective units.
    pub objective: T,
    pub wall_time_ms: f64,
    pub solver_id: String,
    pub restarts_used: usize,
    /// False when a QUBO sample needed repair to become a permutation.
    pub valid: bool,
}

pub(crate) fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs `restarts` independent jobs and returns them in restart order.
/// Restart 0 always runs; later restarts are skipped once the deadline passed.
pub(crate) fn run_restarts<R, F>(config: &SolverConfig, job: F) -> Vec<(usize, R)>
where
    R: Send,
    F: Fn(usize, Option<Instant>) -> R + Sync + Send,
{
    let deadline = config
        .time_budget_ms
        .map(|ms| Instant::now() + Duration::from_millis(ms));
    let body = || {
        (0..config.restarts)
            .into_par_iter()
            .filter_map(|k| {
                if k > 0 && deadline.is_some_and(|d| Instant::now() >= d) {
                    None
                } else {
                    Some((k, job(k, deadline)))
                }
            })
            .collect::<Vec<_>>()
    };
    match config.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map(|pool| pool.install(body))
            .unwrap_or_else(|_| body()),
        None => body(),
    }
}

/// Seed for restart `k`.
pub(crate) fn restart_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add(k as u64)
}

/// Metropolis acceptance for a move of cost change `delta` at `temperature`.
pub(crate) fn accept<R: rand::Rng>(delta: f64, temperature: f64, rng: &mut R) -> bool {
    if delta.is_nan() {
        return false;
    }
    if delta <= 0.0 {
        return true;
    }
    temperature > 0.0 && rng.gen::<f64>() < (-delta / temperature).exp()
}

pub(crate) fn initial_temperature(config: &SolverConfig, mean_abs_delta: f64) -> f64 {
    match config.t_initial {
        InitialTemperature::Fixed(t) => t,
        InitialTemperature::Auto if mean_abs_delta.is_finite() && mean_abs_delta > 0.0 => {
            mean_abs_delta
        }
        InitialTemperature::Auto => 1.0,
    }
}

/// Lowest objective, earliest restart on ties.
pub(crate) fn best_of<T: Scalar, R>(results: Vec<(usize, R)>, key: impl Fn(&R) -> T) -> (usize, R) {
    results
        .into_iter()
        .reduce(|a, b| if key(&b.1) < key(&a.1) { b } else { a })
        .expect("restart 0 always runs")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::defaults_for(3).validate().is_ok());
        assert_eq!(SolverConfig::defaults_for(3).sweeps, 600);
        let mut c = SolverConfig::defaults_for(3);
        c.sweeps = 0;
        assert!(matches!(c.validate(), Err(SolverError::Config(_))));
        let mut c = SolverConfig::defaults_for(3);
        c.restarts = 0;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::defaults_for(3);
        c.cooling_alpha = 1.0;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::defaults_for(3);
        c.t_initial = InitialTemperature::Fixed(-1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn restarts_come_back_in_order() {
        let mut c = SolverConfig::defaults_for(3);
        c.restarts = 7;
        c.threads = Some(3);
        let out = run_restarts(&c, |k, _| k * 10);
        assert_eq!(
            out.iter().map(|r| r.0).collect::<Vec<_>>(),
            (0..7).collect::<Vec<_>>()
        );
        assert_eq!(best_of(vec![(0, 2.0f64), (1, 1.0), (2, 1.0)], |v| *v).0, 1);
    }
}
