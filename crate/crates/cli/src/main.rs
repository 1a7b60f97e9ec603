//! `wva-sim`: runs weak-value amplification scenarios described in TOML.
//!
//! Settings resolve as command-line flag, then scenario file, then built-in
//! default. Exit codes: 0 success, 1 a `validate` invariant failed, 2 the
//! scenario could not be read or parsed, 3 a precondition was violated,
//! 4 a numeric routine did not converge. Errors are reported as one JSON
//! object on stderr.

mod error;
mod output;
mod plot;
mod scenario;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use wva_core::Engine;

use crate::error::CliError;
use crate::output::OutputDir;
use crate::scenario::{Resolved, Task};

/// Environment variable capping the number of worker threads.
const THREADS_VAR: &str = "WVA_SIM_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "wva-sim",
    version,
    about = "Weak-value amplification simulator"
)]
struct Args {
    /// What to run.
    #[arg(value_enum)]
    task: Task,
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Evolution engine; overrides `coupling.engine` (default exact).
    #[arg(long)]
    engine: Option<Engine>,
    /// Random seed; overrides `seed` (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `out` (default ./wva-out).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|t| *t > 0).ok_or_else(|| {
        CliError::precondition(format!(
            "{THREADS_VAR} must be a positive integer (got {raw:?})"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::precondition(format!("cannot start {threads} worker threads: {e}")))
}

fn run(args: Args) -> Result<bool, CliError> {
    let text =
        std::fs::read_to_string(&args.config).map_err(|e| CliError::Unreadable(e.to_string()))?;
    let scenario = scenario::parse(&text)?;
    let resolved = Resolved::new(scenario, args.task, args.engine, args.seed, args.out);
    resolved.validate()?;
    configure_threads()?;

    let mut out = OutputDir::create(&resolved.out)?;
    let mut passed = true;
    match resolved.task {
        Task::Simulate => tasks::simulate(&resolved, &mut out)?,
        Task::Fisher => tasks::fisher(&resolved, &mut out)?,
        Task::McEstimate => tasks::mc_estimate(&resolved, &mut out)?,
        Task::Sweep => tasks::sweep(&resolved, &mut out)?,
        Task::Validate => {
            let checks = tasks::validate(&resolved, &mut out)?;
            for c in &checks {
                println!("{}", c.line());
            }
            let ok = checks.iter().filter(|c| c.passed).count();
            println!("{ok} of {} invariants passed", checks.len());
            passed = ok == checks.len();
        }
    }
    for f in out.finish(&resolved)? {
        println!("wrote {}", resolved.out.join(&f.name).display());
    }
    println!("wrote {}", resolved.out.join(output::MANIFEST).display());
    Ok(passed)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let file = args.config.display().to_string();
    match run(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("{}", e.to_json(&file));
            ExitCode::from(e.exit_code())
        }
    }
}
