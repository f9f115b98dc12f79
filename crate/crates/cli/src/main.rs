use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use biharm_core::ambient::catalog_entries;
use biharm_core::oracle::DEFAULT_STEPS;
use biharm_core::scenario::{
    emit_convergence, emit_report, emit_sweep, immersion_entries, load_scenario, run::ORACLE_MIN_ORDER, convergence_with,
    run_check_with, sweep_solve_with, Objective, ReportFormat, RunOptions, ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "biharm", version, about = "Biharmonic submanifold checks in generalized complex and Sasakian space forms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks of a scenario file.
    Check {
        config: PathBuf,
        /// json or table
        #[arg(long, default_value = "table")]
        format: ReportFormat,
        /// Worker threads (default: BIHARM_THREADS, then all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Sweep one scenario constant and locate sign changes of an objective.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// lo:hi:n
        #[arg(long)]
        range: String,
        /// NormalResidual or CharacterizationGap
        #[arg(long)]
        objective: Objective,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List catalog entries.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Compare the jet normal Laplacian of H with finite differences.
    Convergence {
        config: PathBuf,
        /// Comma-separated steps, each half the previous.
        #[arg(long, value_delimiter = ',')]
        steps: Option<Vec<f64>>,
        #[arg(long, default_value_t = ORACLE_MIN_ORDER)]
        min_order: f64,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    List,
}

/// Exit status: 0 success, 1 verdict mismatch, 2 configuration error.
enum Outcome {
    Ok,
    Mismatch,
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_scenario(&text).with_context(|| format!("loading {}", path.display()))
}

fn parse_range(s: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("range must be lo:hi:n, got '{s}'");
    }
    let lo = parts[0].trim().parse().with_context(|| format!("range lower bound '{}'", parts[0]))?;
    let hi = parts[1].trim().parse().with_context(|| format!("range upper bound '{}'", parts[1]))?;
    let n = parts[2].trim().parse().with_context(|| format!("range sample count '{}'", parts[2]))?;
    Ok((lo, hi, n))
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Check { config, format, threads } => {
            let cfg = load(&config)?;
            let report = run_check_with(&cfg, &RunOptions { threads });
            print!("{}", emit_report(&report, format));
            Ok(if report.expectations_met() { Outcome::Ok } else { Outcome::Mismatch })
        }
        Command::Sweep { config, param, range, objective, format, threads } => {
            let cfg = load(&config)?;
            let (lo, hi, n) = parse_range(&range)?;
            let result = sweep_solve_with(&cfg, &param, lo, hi, n, objective, &RunOptions { threads })?;
            print!("{}", emit_sweep(&result, format));
            Ok(Outcome::Ok)
        }
        Command::Catalog { action: CatalogAction::List } => {
            println!("ambients:");
            for e in catalog_entries() {
                let params: Vec<String> = e.params.iter().map(|(p, d)| format!("{p}={d}")).collect();
                println!("  {:<22} {:<20} {}", e.name, params.join(" "), e.summary);
            }
            println!("immersions:");
            for e in immersion_entries() {
                let params: Vec<String> = e.params.iter().map(|(p, d)| format!("{p}={d:.6}")).collect();
                println!("  {:<22} {:<20} dim {}  {}", e.name, params.join(" "), e.dim(), e.summary);
            }
            Ok(Outcome::Ok)
        }
        Command::Convergence { config, steps, min_order, format, threads } => {
            let cfg = load(&config)?;
            let steps = steps.unwrap_or_else(|| DEFAULT_STEPS.to_vec());
            if steps.len() < 2 {
                bail!("need at least two steps");
            }
            let report = convergence_with(&cfg, &steps, &RunOptions { threads });
            print!("{}", emit_convergence(&report, format));
            let ok = report.applicable && report.failed_points == 0 && report.min_order.map_or(true, |o| o >= min_order);
            Ok(if ok { Outcome::Ok } else { Outcome::Mismatch })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Mismatch) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
