use std::path::PathBuf;

use clap::{Args, ValueEnum};
use q2o_core::costmodel::{cout_of_positions, has_cross_product};
use q2o_core::encoders::{build_nl_model, Objective};
use q2o_core::hints::{emit_leading_hint, order_to_tree, PlanHint};
use q2o_core::joingraph::{connected_components, parse_join_graph};
use q2o_core::solvers::{
    dp_leftdeep, exhaustive, remote_solve, solve_permutation_sa, solve_qubo_pipeline,
    InitialTemperature, LocalSolver, RemoteError, RemoteSolver, SolverConfig, SolverError,
    StubSolver,
};
use q2o_core::{JoinGraphF64, SolutionF64};

use crate::CliError;

/// Wall-clock budget handed to the remote endpoint when `--time-budget-ms` is absent.
pub const DEFAULT_REMOTE_BUDGET_MS: u64 = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncoderKind {
    /// Permutation model.
    Nl,
    /// One-hot binary model.
    Qubo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Sa,
    Dp,
    Exhaustive,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveKind {
    Cout,
    Logproduct,
}

impl From<ObjectiveKind> for Objective {
    fn from(k: ObjectiveKind) -> Self {
        match k {
            ObjectiveKind::Cout => Objective::Cout,
            ObjectiveKind::Logproduct => Objective::LogProduct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Endpoint {
    /// In-process annealer under the time budget.
    Local,
    /// Replays orders from `--replay`.
    Stub,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum, default_value_t = EncoderKind::Nl)]
    pub encoder: EncoderKind,
    #[arg(long, value_enum, default_value_t = SolverKind::Sa)]
    pub solver: SolverKind,
    /// Defaults to cout for the permutation model; the QUBO is always logproduct.
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveKind>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Default 16.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Default 200 per relation.
    #[arg(long)]
    pub sweeps: Option<usize>,
    /// Soft wall-clock cap. Results may then vary between runs.
    #[arg(long)]
    pub time_budget_ms: Option<u64>,
    /// Worker threads for restarts. Does not change results.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Reject disconnected instances and orders that need a cross product.
    #[arg(long)]
    pub strict_no_cross_products: bool,
    #[arg(long, value_enum, default_value_t = Endpoint::Local)]
    pub endpoint: Endpoint,
    /// Replay file for `--endpoint stub`.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Stub round-trip for replay entries that carry none.
    #[arg(long)]
    pub simulated_latency_ms: Option<f64>,
}

impl Default for SolveArgs {
    fn default() -> Self {
        Self {
            encoder: EncoderKind::Nl,
            solver: SolverKind::Sa,
            objective: None,
            seed: 1,
            restarts: None,
            sweeps: None,
            time_budget_ms: None,
            threads: None,
            strict_no_cross_products: false,
            endpoint: Endpoint::Local,
            replay: None,
            simulated_latency_ms: None,
        }
    }
}

impl SolveArgs {
    pub fn config(&self, n: usize) -> SolverConfig {
        let defaults = SolverConfig::defaults_for(n);
        SolverConfig {
            seed: self.seed,
            restarts: self.restarts.unwrap_or(defaults.restarts),
            sweeps: self.sweeps.unwrap_or(defaults.sweeps),
            t_initial: InitialTemperature::Auto,
            time_budget_ms: self.time_budget_ms,
            threads: self.threads,
            ..defaults
        }
    }

    /// The objective the chosen solver minimizes, or an input error for
    /// combinations that do not fit together.
    pub fn objective(&self) -> Result<Objective, CliError> {
        match (self.encoder, self.solver, self.objective) {
            (EncoderKind::Qubo, SolverKind::Sa, None | Some(ObjectiveKind::Logproduct)) => {
                Ok(Objective::LogProduct)
            }
            (EncoderKind::Qubo, SolverKind::Sa, Some(ObjectiveKind::Cout)) => Err(CliError::Input(
                "the qubo encoder minimizes the logproduct objective".into(),
            )),
            (EncoderKind::Qubo, s, _) => Err(CliError::Input(format!(
                "the qubo encoder is only solved by --solver sa (got {})",
                s.to_possible_value()
                    .expect("no skipped variants")
                    .get_name()
            ))),
            (
                EncoderKind::Nl,
                SolverKind::Dp | SolverKind::Exhaustive,
                Some(ObjectiveKind::Logproduct),
            ) => Err(CliError::Input("the exact oracles minimize cout".into())),
            (EncoderKind::Nl, _, o) => Ok(o.unwrap_or(ObjectiveKind::Cout).into()),
        }
    }
}

pub fn load_graph(path: &std::path::Path) -> Result<JoinGraphF64, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_join_graph(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub solution: SolutionF64,
    pub objective: Objective,
    pub cout: f64,
    /// `None` for single-relation instances.
    pub hint: Option<PlanHint>,
}

fn solver_error(e: SolverError) -> CliError {
    match e {
        SolverError::Config(_) => CliError::Input(e.to_string()),
        _ => CliError::Solver(e.to_string()),
    }
}

fn remote_error(e: RemoteError) -> CliError {
    match e {
        RemoteError::Solver(e) => solver_error(e),
        e => CliError::Solver(e.to_string()),
    }
}

pub fn solve_instance(graph: &JoinGraphF64, args: &SolveArgs) -> Result<Solved, CliError> {
    let objective = args.objective()?;
    if args.strict_no_cross_products {
        let components = connected_components(graph).len();
        if components > 1 {
            return Err(CliError::Input(format!(
                "disconnected: cross product required ({components} components)"
            )));
        }
    }
    let config = args.config(graph.len());
    config.validate().map_err(solver_error)?;
    let model = build_nl_model(graph, objective).map_err(|e| CliError::Input(e.to_string()))?;

    let solution = match (args.encoder, args.solver) {
        (EncoderKind::Qubo, _) => solve_qubo_pipeline(graph, &config).map_err(solver_error)?,
        (EncoderKind::Nl, SolverKind::Sa) => {
            solve_permutation_sa(&model, &config).map_err(solver_error)?
        }
        (EncoderKind::Nl, SolverKind::Dp | SolverKind::Exhaustive) => {
            let start = std::time::Instant::now();
            let (order, cost) = if args.solver == SolverKind::Dp {
                dp_leftdeep(graph)
            } else {
                exhaustive(graph)
            }
            .map_err(solver_error)?;
            SolutionF64 {
                order,
                objective: cost,
                wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
                solver_id: if args.solver == SolverKind::Dp {
                    "dp-leftdeep".into()
                } else {
                    "exhaustive".into()
                },
                restarts_used: 0,
                valid: true,
            }
        }
        (EncoderKind::Nl, SolverKind::Remote) => {
            let endpoint: Box<dyn RemoteSolver<f64>> = match args.endpoint {
                Endpoint::Local => Box::new(LocalSolver {
                    config: config.clone(),
                }),
                Endpoint::Stub => {
                    let path = args.replay.as_ref().ok_or_else(|| {
                        CliError::Input("--endpoint stub needs --replay <file>".into())
                    })?;
                    let mut stub = StubSolver::from_file(path)
                        .map_err(remote_error)?
                        .with_sleep(false);
                    if let Some(ms) = args.simulated_latency_ms {
                        if !(ms.is_finite() && ms >= 0.0) {
                            return Err(CliError::Input(format!(
                                "--simulated-latency-ms {ms} must be non-negative"
                            )));
                        }
                        stub = stub.with_default_latency_ms(ms);
                    }
                    Box::new(stub)
                }
            };
            let budget = args.time_budget_ms.unwrap_or(DEFAULT_REMOTE_BUDGET_MS);
            remote_solve(&model, budget, endpoint.as_ref()).map_err(remote_error)?
        }
    };

    let positions = graph
        .positions_of(&solution.order)
        .expect("solvers return permutations of the graph's aliases");
    if args.strict_no_cross_products && has_cross_product(graph, &positions) {
        return Err(CliError::Solver(format!(
            "order {} contains a cross product",
            solution.order.join(",")
        )));
    }
    let hint = match order_to_tree(&solution.order) {
        Ok(tree) => Some(emit_leading_hint(&tree).expect("tree has at least two leaves")),
        Err(_) => None,
    };
    Ok(Solved {
        cout: cout_of_positions(graph, &positions),
        solution,
        objective,
        hint,
    })
}
