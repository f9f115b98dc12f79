//! One-parameter sweeps with root refinement, and grid convergence studies.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::biharmonic::{verdict, Verdict, MINIMAL_TOLERANCE};
use crate::oracle::{convergence, OracleError, StepError};

use super::config::{ConfigError, ScenarioConfig};
use super::run::{evaluate_points, PointValues, RunOptions};

/// Bisection stops once the bracket is this narrow.
pub const ROOT_TOLERANCE: f64 = 1e-10;

/// Finite-difference errors below this count as exact.
pub const EXACT_ERROR: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    /// Grid mean of the signed normal residual `<tau_perp, H> / |H|`.
    NormalResidual,
    /// Grid mean of `|B|^2` minus the CMC characterization constant.
    CharacterizationGap,
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "normalresidual" => Ok(Objective::NormalResidual),
            "characterizationgap" => Ok(Objective::CharacterizationGap),
            _ => Err(format!("unknown objective '{s}' (expected NormalResidual or CharacterizationGap)")),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid sweep range: {0}")]
    Range(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub value: f64,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub objective: f64,
    pub verdict: Verdict,
    pub failed_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootKind {
    Proper,
    Minimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRoot {
    pub value: f64,
    pub objective: f64,
    pub max_h: f64,
    pub max_residual: f64,
    pub kind: RootKind,
    pub verdict: Verdict,
    pub bisection_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scenario: String,
    pub param: String,
    pub objective: Objective,
    pub lo: f64,
    pub hi: f64,
    pub samples: Vec<SweepSample>,
    pub roots: Vec<SweepRoot>,
    pub notes: Vec<String>,
}

struct Evaluation {
    objective: f64,
    max_h: f64,
    max_residual: f64,
    failed: usize,
}

impl Evaluation {
    fn verdict(&self) -> Verdict {
        if self.objective.is_nan() {
            Verdict::Undetermined
        } else {
            verdict(self.max_residual, self.max_h)
        }
    }
}

fn evaluate(cfg: &ScenarioConfig, param: &str, x: f64, objective: Objective, opts: &RunOptions) -> Result<Evaluation, SweepError> {
    let c = cfg.with_constant(param, x)?;
    let points = evaluate_points(&c, opts);
    let values: Vec<&PointValues> = points.iter().filter_map(|p| p.values.as_ref()).collect();
    let pick = |v: &PointValues| match objective {
        Objective::NormalResidual => v.signed_normal_residual,
        Objective::CharacterizationGap => v.characterization_gap,
    };
    let objective = if values.is_empty() { f64::NAN } else { values.iter().map(|v| pick(v)).sum::<f64>() / values.len() as f64 };
    Ok(Evaluation {
        objective,
        max_h: values.iter().map(|v| v.sample.h_norm).fold(f64::NAN, f64::max),
        max_residual: values.iter().map(|v| v.general.max_norm()).fold(f64::NAN, f64::max),
        failed: points.len() - values.len(),
    })
}

pub fn sweep_solve(cfg: &ScenarioConfig, param: &str, lo: f64, hi: f64, n: usize, objective: Objective) -> Result<SweepResult, SweepError> {
    sweep_solve_with(cfg, param, lo, hi, n, objective, &RunOptions::default())
}

/// Samples the objective at `n` uniform points of `[lo, hi]` and refines each
/// sign change by bisection.
pub fn sweep_solve_with(
    cfg: &ScenarioConfig,
    param: &str,
    lo: f64,
    hi: f64,
    n: usize,
    objective: Objective,
    opts: &RunOptions,
) -> Result<SweepResult, SweepError> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(SweepError::Range(format!("need finite lo < hi, got {lo}:{hi}")));
    }
    if n < 2 {
        return Err(SweepError::Range(format!("need at least 2 samples, got {n}")));
    }
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let mut samples = Vec::with_capacity(n);
    let mut evals = Vec::with_capacity(n);
    for &x in &xs {
        let e = evaluate(cfg, param, x, objective, opts)?;
        samples.push(SweepSample { value: x, objective: e.objective, verdict: e.verdict(), failed_points: e.failed });
        evals.push(e);
    }
    let mut roots = Vec::new();
    let mut notes = Vec::new();
    let root_at = |x: f64, e: &Evaluation, steps: usize| SweepRoot {
        value: x,
        objective: e.objective,
        max_h: e.max_h,
        max_residual: e.max_residual,
        kind: if e.max_h > MINIMAL_TOLERANCE { RootKind::Proper } else { RootKind::Minimal },
        verdict: e.verdict(),
        bisection_steps: steps,
    };
    for i in 0..n {
        let fa = evals[i].objective;
        if fa == 0.0 {
            roots.push(root_at(xs[i], &evals[i], 0));
            continue;
        }
        if i + 1 == n {
            break;
        }
        let fb = evals[i + 1].objective;
        if fa.is_nan() || fb.is_nan() || fb == 0.0 || fa.signum() == fb.signum() {
            continue;
        }
        let (mut a, mut b, mut fa) = (xs[i], xs[i + 1], fa);
        let mut steps = 0;
        while b - a > ROOT_TOLERANCE && steps < 200 {
            let mid = 0.5 * (a + b);
            let e = evaluate(cfg, param, mid, objective, opts)?;
            steps += 1;
            if e.objective.is_nan() {
                notes.push(format!("objective undefined at {mid} while refining [{}, {}]", xs[i], xs[i + 1]));
                break;
            }
            if e.objective == 0.0 {
                a = mid;
                b = mid;
            } else if e.objective.signum() == fa.signum() {
                a = mid;
                fa = e.objective;
            } else {
                b = mid;
            }
        }
        let x = 0.5 * (a + b);
        let e = evaluate(cfg, param, x, objective, opts)?;
        roots.push(root_at(x, &e, steps));
    }
    if roots.is_empty() {
        notes.push("no sign change over the range".into());
    }
    Ok(SweepResult {
        scenario: cfg.name.clone(),
        param: param.to_string(),
        objective,
        lo,
        hi,
        samples,
        roots,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub u: Vec<f64>,
    pub errors: Vec<StepError>,
    /// `None` where an error pair is at roundoff level.
    pub orders: Vec<Option<f64>>,
    /// Smallest order, `None` when every error is below roundoff.
    pub observed_order: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scenario: String,
    pub steps: Vec<f64>,
    /// False when the ambient is not a flat chart.
    pub applicable: bool,
    pub points: Vec<ConvergencePoint>,
    pub min_order: Option<f64>,
    pub failed_points: usize,
    pub notes: Vec<String>,
}

pub fn convergence_report(cfg: &ScenarioConfig, steps: &[f64]) -> ConvergenceReport {
    convergence_with(cfg, steps, &RunOptions::default())
}

/// Runs the finite-difference oracle at every grid point.
pub fn convergence_with(cfg: &ScenarioConfig, steps: &[f64], opts: &RunOptions) -> ConvergenceReport {
    let grid = cfg.immersion.domain.grid();
    let results: Vec<Result<ConvergencePoint, (Vec<f64>, OracleError)>> = opts.install(|| {
        grid.par_iter()
            .map(|u| match convergence(&cfg.ambient, &cfg.immersion, u, steps) {
                Ok(study) => {
                    let orders: Vec<Option<f64>> = study
                        .errors
                        .windows(2)
                        .zip(&study.orders)
                        .map(|(w, o)| (w[1].error >= EXACT_ERROR && o.is_finite()).then_some(*o))
                        .collect();
                    let observed = orders.iter().flatten().copied().reduce(f64::min);
                    Ok(ConvergencePoint { u: u.clone(), errors: study.errors, orders, observed_order: observed, error: None })
                }
                Err(e) => Err((u.clone(), e)),
            })
            .collect()
    });
    let mut notes = Vec::new();
    let applicable = !results.iter().any(|r| matches!(r, Err((_, OracleError::NotFlat(_)))));
    if !applicable {
        notes.push(format!("ambient '{}' is not a flat chart; the oracle needs one", cfg.ambient.name));
    }
    let mut failed = 0;
    let points: Vec<ConvergencePoint> = results
        .into_iter()
        .map(|r| match r {
            Ok(p) => p,
            Err((u, e)) => {
                failed += 1;
                ConvergencePoint { u, errors: vec![], orders: vec![], observed_order: None, error: Some(e.to_string()) }
            }
        })
        .collect();
    let exact = points.iter().filter(|p| p.error.is_none() && p.observed_order.is_none()).count();
    if exact > 0 {
        notes.push(format!("{exact} point(s) with finite-difference error at roundoff level"));
    }
    let min_order = points.iter().filter_map(|p| p.observed_order).reduce(f64::min);
    ConvergenceReport {
        scenario: cfg.name.clone(),
        steps: steps.to_vec(),
        applicable,
        points,
        min_order,
        failed_points: failed,
        notes,
    }
}
