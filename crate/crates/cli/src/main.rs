use std::path::PathBuf;
use std::process::ExitCode;

use brinkman_bem_cli::{run_scenario, Scenario};
use clap::Parser;

/// Solve a Brinkman-Stokes transmission problem described by a scenario file.
#[derive(Debug, Parser)]
#[command(name = "solve", version)]
struct Args {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Output directory; overrides `output` in the scenario.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
    /// Random seed; overrides `seed` in the scenario.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut scenario = match Scenario::load(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: invalid scenario: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let dir = args
        .out
        .or_else(|| scenario.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match run_scenario(&scenario, &dir) {
        Ok(()) => {
            println!("outputs written to {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("partial outputs in {}", dir.display());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
