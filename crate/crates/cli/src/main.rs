mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use momineq::report::write_report;
use momineq::sim::with_threads;
use serde::Serialize;

use args::{Cli, Command, Format, WithCommon};
use commands::{Outcome, UsageError};

const EXIT_FAILED_POINTS: u8 = 1;
const EXIT_USAGE: u8 = 2;

/// Resolves the default format into the config, then runs `run` on the requested workers.
fn execute<A: Serialize + Sync + Clone + WithCommon>(
    name: &str,
    args: &A,
    default_format: Format,
    run: fn(&A) -> anyhow::Result<Outcome>,
) -> anyhow::Result<Vec<String>> {
    let mut args = args.clone();
    let common = args.common_mut();
    common.format = Some(common.format.unwrap_or(default_format));
    let args = &args;
    let common = args.common();
    if common.dry_run {
        print!("{}", commands::dry_run(name, args)?);
        return Ok(Vec::new());
    }
    let threads = match common.threads {
        Some(0) => return Err(UsageError("--threads must be positive".into()).into()),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let outcome = with_threads(threads, || run(args))??;
    write_report(common.output.as_deref(), &outcome.report)?;
    Ok(outcome.failures)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Critval(a) => execute("critval", a, Format::Json, commands::critval),
        Command::PowerCurve(a) => execute("power-curve", a, Format::Csv, commands::power_curve),
        Command::Duality(a) => execute("duality", a, Format::Json, commands::duality),
        Command::UpperBound(a) => execute("upper-bound", a, Format::Csv, commands::upper_bound),
        Command::Treatment(a) => execute("treatment", a, Format::Csv, commands::treatment),
        Command::Invert(a) => execute("invert", a, Format::Json, commands::invert),
    };
    match result {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("error: {} grid point(s) failed:", failures.len());
            for f in &failures {
                eprintln!("  {f}");
            }
            ExitCode::from(EXIT_FAILED_POINTS)
        }
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILED_POINTS)
        }
    }
}
