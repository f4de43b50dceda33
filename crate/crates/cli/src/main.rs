#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kahler_core::scenario::{
    load_scenario, report, run, run_curvature, run_solve, verify, ScenarioConfig, ScenarioError, Status,
};

const EXIT_VERIFY: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_SOLVER: u8 = 3;

/// Continuity-method laboratory on periodic Kähler model manifolds.
#[derive(Parser)]
#[command(name = "kahler-lab", version)]
struct Cli {
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, global = true, env = "KLAB_THREADS", default_value_t = 0)]
    threads: usize,

    /// Override the Newton sup-norm residual target.
    #[arg(long, global = true)]
    tolerance: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Scenario {
    /// Scenario JSON file.
    #[arg(long)]
    config: PathBuf,

    /// Output directory; defaults to the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve at one ε, continuing from the larger scheduled values.
    Solve {
        #[command(flatten)]
        scenario: Scenario,
        /// Defaults to the smallest scheduled ε.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Full pipeline: curvature, ε-sweep, classification, KW report, dumps.
    Sweep {
        #[command(flatten)]
        scenario: Scenario,
    },
    /// Run (or reuse) the pipeline and check every invariant.
    Verify {
        #[command(flatten)]
        scenario: Scenario,
    },
    /// Curvature, κ and M only.
    Curvature {
        #[command(flatten)]
        scenario: Scenario,
    },
    /// Summarize a run directory into summary.json and plot.csv.
    Report { dir: PathBuf },
}

enum Failure {
    Usage(String),
    Solver(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        if e.is_solver_failure() {
            Failure::Solver(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn load(scenario: &Scenario, tolerance: Option<f64>) -> Result<(ScenarioConfig, PathBuf), Failure> {
    let mut config = load_scenario(&scenario.config)?;
    if let Some(tol) = tolerance {
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(Failure::Usage(format!("--tolerance must be positive, got {tol}")));
        }
        config.solver.tolerance = tol;
    }
    let out = scenario.out.clone().unwrap_or_else(|| config.output.clone());
    Ok((config, out))
}

fn execute(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Solve { scenario, epsilon } => {
            let (config, out) = load(&scenario, cli.tolerance)?;
            let eps = match epsilon {
                Some(e) if e > 0.0 && e.is_finite() => e,
                Some(e) => return Err(Failure::Usage(format!("--epsilon must be positive, got {e}"))),
                None => *config.schedule.epsilons().last().expect("validated schedule is non-empty"),
            };
            let file = run_solve(&config, eps, &out)?;
            println!("{}", serde_json::to_string_pretty(&file).expect("serializable"));
        }
        Command::Sweep { scenario } => {
            let (config, out) = load(&scenario, cli.tolerance)?;
            let result = run(&config, &out)?;
            let class = result.record.classification.as_ref();
            println!(
                "{}: {} entries, classification {}, written to {}",
                config.name,
                result.record.entries.len(),
                class.map_or("none".to_string(), |c| format!("{:?} (mass₀ {:.6e})", c.classification, c.extrapolated_mass0)),
                out.display()
            );
        }
        Command::Verify { scenario } => {
            let (config, out) = load(&scenario, cli.tolerance)?;
            let report = verify(&config, &out)?;
            for e in &report.entries {
                let tag = match e.status {
                    Status::Pass => "pass",
                    Status::Fail => "FAIL",
                    Status::Skipped => "skip",
                };
                let why = e.reason.as_deref().map(|r| format!(" ({r})")).unwrap_or_default();
                println!("{tag:4} {:34} margin {:+.3e}{why}", e.name, e.margin);
            }
            let failures = report.failures().len();
            println!("{}: {failures} failures of {} invariants", config.name, report.entries.len());
            if failures > 0 {
                return Ok(EXIT_VERIFY);
            }
        }
        Command::Curvature { scenario } => {
            let (config, out) = load(&scenario, cli.tolerance)?;
            let rep = run_curvature(&config, &out)?;
            println!("{}", serde_json::to_string_pretty(&rep.summary()).expect("serializable"));
        }
        Command::Report { dir } => {
            let summary = report(&dir)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        log::warn!("thread pool already initialized: {e}");
    }
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(EXIT_SOLVER)
        }
    }
}
