use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use q2o_core::encoders::{build_qubo, Objective};
use q2o_core::joingraph::{validate, Warning, ORACLE_LIMIT};
use q2o_core::solvers::dp_leftdeep;

use crate::solve::{load_graph, solve_instance, SolveArgs, SolverKind};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    /// Order, costs, oracle gap and hint.
    Summary,
    /// The hint comment only.
    Hint,
    /// The QUBO coefficients, one `i j value` line per term.
    Qubo,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, value_enum, default_value_t = Emit::Summary)]
    pub emit: Emit,
    #[command(flatten)]
    pub solve: SolveArgs,
}

#[derive(Debug, Clone, Default)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
}

/// Runs one instance. Everything in `stdout` is a function of the inputs;
/// timings and warnings go to `stderr`.
pub fn optimize(args: &OptimizeArgs) -> Result<Output, CliError> {
    let graph = load_graph(&args.graph)?;
    let mut out = Output::default();
    for w in validate(&graph) {
        if !matches!(w, Warning::MissingSql) {
            let _ = writeln!(out.stderr, "warning: {w}");
        }
    }

    if args.emit == Emit::Qubo {
        let qubo = build_qubo(&graph).map_err(|e| CliError::Input(e.to_string()))?;
        out.stdout = qubo.to_dump();
        return Ok(out);
    }

    let solved = solve_instance(&graph, &args.solve)?;
    let s = &solved.solution;
    let _ = writeln!(
        out.stderr,
        "{}: {:.3} ms, {} restart(s)",
        s.solver_id, s.wall_time_ms, s.restarts_used
    );

    if args.emit == Emit::Hint {
        let hint = solved
            .hint
            .ok_or_else(|| CliError::Input("a hint needs at least two relations".into()))?;
        out.stdout = format!("{}\n", hint.text);
        return Ok(out);
    }

    let objective = match solved.objective {
        Objective::Cout => "cout",
        Objective::LogProduct => "logproduct",
    };
    let o = &mut out.stdout;
    let _ = writeln!(o, "instance: {} ({} relations)", graph.name(), graph.len());
    let _ = writeln!(o, "solver: {}", s.solver_id);
    let _ = writeln!(o, "order: {}", s.order.join(","));
    let _ = writeln!(o, "objective ({objective}): {}", s.objective);
    let _ = writeln!(o, "cout: {}", solved.cout);
    if !s.valid {
        let _ = writeln!(o, "repaired: true");
    }
    if graph.len() <= ORACLE_LIMIT {
        let optimum = if args.solve.solver == SolverKind::Dp {
            solved.cout
        } else {
            dp_leftdeep(&graph)
                .map_err(|e| CliError::Solver(e.to_string()))?
                .1
        };
        let gap = 100.0 * (solved.cout - optimum) / optimum;
        let _ = writeln!(o, "dp_gap: {gap:.2}% (optimum cout {optimum})");
    } else {
        let _ = writeln!(o, "dp_gap: n/a (oracle unavailable above n={ORACLE_LIMIT})");
    }
    match &solved.hint {
        Some(h) => {
            let _ = writeln!(o, "hint: {}", h.text);
        }
        None => {
            let _ = writeln!(o, "hint: none (single relation)");
        }
    }
    Ok(out)
}
