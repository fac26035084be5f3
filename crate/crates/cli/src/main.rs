//! `qpot` — scenario runner for the quantum-potential laboratory.
//!
//! Exit codes: 0 success, 1 failed verification, 2 configuration error,
//! 3 numerical-stability error.

mod config;
mod runner;
mod verify;

use clap::{Parser, Subcommand};
use config::ScenarioConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qpot", version, about = "Quantum-potential laboratory runner")]
struct Cli {
    /// Scenario configuration file (key = value with [section] headers);
    /// defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overriding the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Random seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Time step override.
    #[arg(long, global = true)]
    dt: Option<f64>,

    /// Step-count override (sets horizon = dt * steps).
    #[arg(long, global = true)]
    steps: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Information functionals and inequality report of the initial density.
    Functionals,
    /// Sampled analytic kernels and propagators.
    Kernels,
    /// Crank-Nicolson Schrodinger evolution with Madelung fields.
    EvolveQuantum,
    /// Fokker-Planck evolution with Brownian hydrodynamics diagnostics.
    EvolveBrownian,
    /// Euler-Maruyama ensemble with empirical drift bins.
    Ensemble,
    /// Large-friction kinetic moments and pressure balances.
    Kinetic,
    /// Maximum-entropy and Fisher-extremum solvers.
    Variational,
    /// Anti-Brownian recoil stepping of the matter data.
    Recoil,
    /// Runs the acceptance criteria and reports pass/fail per criterion.
    Verify {
        /// Run only criteria whose name contains one of these substrings
        /// (comma-separated), e.g. `c01,c05`.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, runner::RunError> {
    let mut cfg = match &cli.config {
        None => ScenarioConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| runner::RunError {
                message: format!("cannot read {}: {e}", path.display()),
                code: 2,
            })?;
            config::parse(&text).map_err(|e| runner::RunError {
                message: e.to_string(),
                code: 2,
            })?
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dt) = cli.dt {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(runner::RunError {
                message: "config error: dt must be positive".into(),
                code: 2,
            });
        }
        cfg.dt = dt;
    }
    if let Some(steps) = cli.steps {
        if steps == 0 {
            return Err(runner::RunError {
                message: "config error: steps must be positive".into(),
                code: 2,
            });
        }
        cfg.horizon = cfg.dt * steps as f64;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{}", e.message);
            return ExitCode::from(e.code as u8);
        }
    };
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.outputs));

    let outcome = match &cli.command {
        Command::Functionals => runner::run_functionals(&cfg, &out_dir),
        Command::Kernels => runner::run_kernels(&cfg, &out_dir),
        Command::EvolveQuantum => runner::run_evolve_quantum(&cfg, &out_dir),
        Command::EvolveBrownian => runner::run_evolve_brownian(&cfg, &out_dir),
        Command::Ensemble => runner::run_ensemble(&cfg, &out_dir),
        Command::Kinetic => runner::run_kinetic(&cfg, &out_dir),
        Command::Variational => runner::run_variational(&cfg, &out_dir),
        Command::Recoil => runner::run_recoil(&cfg, &out_dir),
        Command::Verify { only } => {
            let res = verify::Resolution::from_points(cfg.n_points);
            let results = verify::run(&res, only);
            if results.is_empty() {
                eprintln!(
                    "no criterion matches the selection; available: {}",
                    verify::criterion_names().join(", ")
                );
                return ExitCode::from(2);
            }
            let mut failed = 0usize;
            for r in &results {
                let status = if r.passed { "PASS" } else { "FAIL" };
                println!("[{status}] {}: {}", r.name, r.detail);
                if !r.passed {
                    failed += 1;
                }
            }
            println!(
                "verify: {}/{} criteria passed",
                results.len() - failed,
                results.len()
            );
            return if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
