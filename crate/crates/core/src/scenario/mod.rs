//! Scenario files, the immersion catalog, execution, sweeps and reports.

pub mod catalog;
pub mod config;
pub mod report;
pub mod run;
pub mod sweep;

pub use catalog::{immersion_entries, immersion_entry, ImmersionEntry};
pub use config::{load_scenario, CheckKind, CheckSpec, ConfigError, ScenarioConfig, ScenarioDocument, SCHEMA_VERSION};
pub use report::{emit_convergence, emit_report, emit_sweep, parse_report, ReportFormat};
pub use run::{run_check, run_check_with, CheckResult, PointRecord, Report, RunOptions, THREADS_ENV};
pub use sweep::{convergence_report, convergence_with, sweep_solve, sweep_solve_with, Objective, RootKind, SweepError, SweepResult};
