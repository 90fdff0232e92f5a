use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use q2o_cli::bench::{finish, load_fixtures, run_bench, Source};
use q2o_cli::{optimize, report_command, BenchArgs, Cli, CliError, Command};
use q2o_pgclient::{ConnectionSettings, PgSession};

fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let rows = match &args.fixtures {
        Some(path) => run_bench(args, Source::Fixtures(load_fixtures(path)?))?,
        None => {
            let settings = ConnectionSettings::from_env()
                .map_err(|e| CliError::Input(e.to_string()))?
                .ok_or_else(|| {
                    CliError::Input("no --fixtures given and no Q2O_PG_* variables set".into())
                })?;
            let mut session =
                PgSession::connect(&settings).map_err(|e| CliError::NoSuccess(e.to_string()))?;
            run_bench(args, Source::Live(&mut session))?
        }
    };
    let summary = finish(&rows, args.output.as_deref())?;
    if args.output.is_some() {
        print!("{}", summary.text);
    } else {
        print!("{}", summary.csv);
        eprint!("{}", summary.text);
    }
    if summary.any_success {
        Ok(())
    } else {
        Err(CliError::NoSuccess("no query succeeded".into()))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Optimize(args) => {
            let out = optimize(&args)?;
            eprint!("{}", out.stderr);
            print!("{}", out.stdout);
            Ok(())
        }
        Command::Bench(args) => bench(&args),
        Command::Report(args) => {
            print!("{}", report_command(&args)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
