//! Boundary to an out-of-process join-order solver.
//!
//! `LocalSolver` runs the permutation annealer under a wall-clock budget.
//! `StubSolver` replays canned answers after a simulated round-trip, which
//! lets the end-to-end pipeline run without cloud credentials.

use std::collections::HashMap;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{elapsed_ms, solve_permutation_sa, Solution, SolverConfig, SolverError};
use crate::costmodel::order_positions;
use crate::encoders::PermutationModel;
use crate::scalar::Scalar;

/// Simulated round-trip used when a replay entry does not carry its own.
pub const DEFAULT_SIMULATED_LATENCY_MS: f64 = 2800.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RemoteError {
    #[error("solver endpoint unavailable: {0}")]
    EndpointUnavailable(String),
    #[error("replay file has no entry for instance `{0}`")]
    ReplayMissing(String),
    #[error("replay entry for `{0}` is not a permutation of the instance's aliases")]
    InvalidReplay(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub trait RemoteSolver<T: Scalar>: Send + Sync {
    fn id(&self) -> &str;

    fn solve(
        &self,
        model: &PermutationModel<'_, T>,
        budget_ms: u64,
    ) -> Result<Solution<T>, RemoteError>;
}

/// Hands `model` to `endpoint`; the returned wall time covers the full round-trip.
pub fn remote_solve<T: Scalar>(
    model: &PermutationModel<'_, T>,
    budget_ms: u64,
    endpoint: &dyn RemoteSolver<T>,
) -> Result<Solution<T>, RemoteError> {
    let start = Instant::now();
    let mut solution = endpoint.solve(model, budget_ms)?;
    solution.wall_time_ms = solution.wall_time_ms.max(elapsed_ms(start));
    Ok(solution)
}

#[derive(Debug, Clone)]
pub struct LocalSolver {
    pub config: SolverConfig,
}

impl<T: Scalar> RemoteSolver<T> for LocalSolver {
    fn id(&self) -> &str {
        "local"
    }

    fn solve(
        &self,
        model: &PermutationModel<'_, T>,
        budget_ms: u64,
    ) -> Result<Solution<T>, RemoteError> {
        let config = SolverConfig {
            time_budget_ms: Some(budget_ms),
            ..self.config.clone()
        };
        let mut s = solve_permutation_sa(model, &config)?;
        s.solver_id = "remote-local".into();
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub order: Vec<String>,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulated_latency_ms: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StubSolver {
    replay: HashMap<String, ReplayEntry>,
    default_latency_ms: f64,
    sleep: bool,
}

impl StubSolver {
    pub fn new(replay: HashMap<String, ReplayEntry>) -> Self {
        Self {
            replay,
            default_latency_ms: DEFAULT_SIMULATED_LATENCY_MS,
            sleep: true,
        }
    }

    /// Replay map: instance name -> {order, objective, simulated_latency_ms}.
    pub fn from_json(text: &str) -> Result<Self, RemoteError> {
        let replay = serde_json::from_str(text)
            .map_err(|e| RemoteError::EndpointUnavailable(format!("bad replay file: {e}")))?;
        Ok(Self::new(replay))
    }

    pub fn from_file(path: &Path) -> Result<Self, RemoteError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            RemoteError::EndpointUnavailable(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn with_default_latency_ms(mut self, ms: f64) -> Self {
        self.default_latency_ms = ms;
        self
    }

    /// When false, the simulated latency is reported without waiting for it.
    pub fn with_sleep(mut self, sleep: bool) -> Self {
        self.sleep = sleep;
        self
    }
}

impl<T: Scalar> RemoteSolver<T> for StubSolver {
    fn id(&self) -> &str {
        "stub"
    }

    fn solve(
        &self,
        model: &PermutationModel<'_, T>,
        _budget_ms: u64,
    ) -> Result<Solution<T>, RemoteError> {
        let start = Instant::now();
        let name = model.graph().name();
        let entry = self
            .replay
            .get(name)
            .ok_or_else(|| RemoteError::ReplayMissing(name.to_string()))?;
        let positions = order_positions(model.graph(), &entry.order)
            .map_err(|_| RemoteError::InvalidReplay(name.to_string()))?;
        let latency = entry
            .simulated_latency_ms
            .unwrap_or(self.default_latency_ms)
            .max(0.0);
        let wall_time_ms = if self.sleep {
            std::thread::sleep(Duration::from_secs_f64(latency / 1e3));
            elapsed_ms(start)
        } else {
            latency
        };
        Ok(Solution {
            order: entry.order.clone(),
            objective: model.evaluate_positions(&positions),
            wall_time_ms,
            solver_id: "remote-stub".into(),
            restarts_used: 0,
            valid: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{build_nl_model, Objective};
    use crate::testing::chain3;

    fn replay(latency: Option<f64>) -> String {
        let latency = latency
            .map(|l| format!(r#","simulated_latency_ms":{l}"#))
            .unwrap_or_default();
        format!(r#"{{"chain3":{{"order":["A","B","C"],"objective":200{latency}}}}}"#)
    }

    #[test]
    fn local_respects_budget_and_finds_optimum() {
        let g = chain3();
        let m = build_nl_model(&g, Objective::Cout).unwrap();
        let local = LocalSolver {
            config: SolverConfig::defaults_for(3),
        };
        let s = remote_solve(&m, 50, &local).unwrap();
        assert!((s.objective - 200.0).abs() < 1e-9);
        assert!(s.wall_time_ms < 50.0 + 250.0, "{}", s.wall_time_ms);
    }

    #[test]
    fn stub_reports_simulated_latency() {
        let g = chain3();
        let m = build_nl_model(&g, Objective::Cout).unwrap();
        let stub = StubSolver::from_json(&replay(Some(2530.22)))
            .unwrap()
            .with_sleep(false);
        let s = remote_solve(&m, 0, &stub).unwrap();
        assert_eq!(s.order, vec!["A", "B", "C"]);
        assert!((s.wall_time_ms - 2530.22).abs() < 1.0);
        assert!((s.objective - 200.0).abs() < 1e-9);

        let stub = StubSolver::from_json(&replay(None))
            .unwrap()
            .with_sleep(false);
        let s = remote_solve(&m, 0, &stub).unwrap();
        assert!((s.wall_time_ms - DEFAULT_SIMULATED_LATENCY_MS).abs() < 1.0);
    }

    #[test]
    fn stub_sleeps_when_asked() {
        let g = chain3();
        let m = build_nl_model(&g, Objective::Cout).unwrap();
        let stub = StubSolver::from_json(&replay(Some(30.0))).unwrap();
        let s = remote_solve(&m, 0, &stub).unwrap();
        assert!(s.wall_time_ms >= 30.0);
    }

    #[test]
    fn stub_errors() {
        let g = chain3();
        let m = build_nl_model(&g, Objective::Cout).unwrap();
        let empty = StubSolver::from_json("{}").unwrap();
        assert_eq!(
            remote_solve(&m, 0, &empty).unwrap_err(),
            RemoteError::ReplayMissing("chain3".into())
        );
        let bad =
            StubSolver::from_json(r#"{"chain3":{"order":["A","A","C"],"objective":0}}"#).unwrap();
        assert_eq!(
            remote_solve(&m, 0, &bad).unwrap_err(),
            RemoteError::InvalidReplay("chain3".into())
        );
        assert!(matches!(
            StubSolver::from_file(Path::new("/nonexistent/replay.json")),
            Err(RemoteError::EndpointUnavailable(_))
        ));
    }
}
