//! Scenario execution: per-point evaluation on a thread pool, aggregation and
//! the requested checks.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use crate::ambient::{AmbientKind, PointCoefficients};
use crate::biharmonic::{
    bound_check, cmc_characterization, cmc_status, nonexistence_audit, point_data, residual_general,
    residual_specialized, specialization_gap, verdict, BiharmonicResidual, BoundReport, Branch,
    CharacterizationOutcome, CmcStatus, GridSample, Verdict, CMC_TOLERANCE, MINIMAL_TOLERANCE, RESIDUAL_TOLERANCE,
};
use crate::oracle::DEFAULT_STEPS;
use crate::structure::DEFAULT_TOLERANCE;
use crate::submanifold::{Domain, IMMERSION_ORDER};

use super::config::{CheckKind, CheckSpec, ScenarioConfig, ScenarioDocument, SCHEMA_VERSION};
use super::sweep::{convergence_with, ConvergenceReport};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "BIHARM_THREADS";

/// Minimal convergence order accepted by the oracle check.
pub const ORACLE_MIN_ORDER: f64 = 1.9;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` reads `BIHARM_THREADS`, then uses all cores.
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn with_threads(threads: usize) -> Self {
        RunOptions { threads: Some(threads) }
    }

    fn resolved_threads(&self) -> usize {
        self.threads
            .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse().ok()))
            .unwrap_or(0)
    }

    /// Runs `f` inside a pool of the requested size.
    pub(crate) fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match rayon::ThreadPoolBuilder::new().num_threads(self.resolved_threads()).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub branch: Branch,
    pub normal_norm: f64,
    pub tangential_norm: f64,
}

impl ResidualSummary {
    fn of(r: &BiharmonicResidual) -> Self {
        ResidualSummary { branch: r.branch, normal_norm: r.normal_norm, tangential_norm: r.tangential_norm }
    }

    pub fn max_norm(&self) -> f64 {
        self.normal_norm.max(self.tangential_norm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecializedSummary {
    pub theorem: ResidualSummary,
    /// Most specific branch whose hypotheses hold (the theorem if none).
    pub active: ResidualSummary,
    pub branches: Vec<Branch>,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointValues {
    pub sample: GridSample,
    pub general: ResidualSummary,
    pub specialized: Option<SpecializedSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specialized_error: Option<String>,
    /// `<normal residual, H> / |H|`, zero at minimal points.
    pub signed_normal_residual: f64,
    /// `|B|^2` minus the CMC characterization constant.
    pub characterization_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub index: usize,
    pub u: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<PointValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// `3(alpha + beta)` or `m f1 - f2 + 3 f3`.
pub fn characterization_target(s: &GridSample) -> f64 {
    match s.coefficients {
        PointCoefficients::Complex { alpha, beta } => 3.0 * (alpha + beta),
        PointCoefficients::Contact { f1, f2, f3 } => s.m as f64 * f1 - f2 + 3.0 * f3,
    }
}

fn evaluate_point(cfg: &ScenarioConfig, index: usize, u: &[f64]) -> PointRecord {
    let fail = |e: String| PointRecord { index, u: u.to_vec(), values: None, error: Some(e) };
    let pd = match point_data(&cfg.ambient, &cfg.immersion, u, DEFAULT_TOLERANCE) {
        Ok(pd) => pd,
        Err(e) => return fail(e.to_string()),
    };
    let sample = match GridSample::from_point(&pd) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string()),
    };
    let general = residual_general(&pd.geometry, &pd.derivatives, &pd.curvature_trace);
    let (specialized, specialized_error) = match residual_specialized(&pd) {
        Ok(sr) => {
            let summary = SpecializedSummary {
                theorem: ResidualSummary::of(&sr.theorem),
                active: ResidualSummary::of(sr.active()),
                branches: sr.branches.iter().map(|b| b.branch).collect(),
                gap: specialization_gap(&general, &sr),
            };
            (Some(summary), None)
        }
        Err(e) => (None, Some(e.to_string())),
    };
    let h = sample.h_norm;
    let signed = if h > 1e-14 {
        let st = &pd.geometry.state;
        let normal = nalgebra::DVector::from_column_slice(&general.normal);
        st.inner(&normal, &pd.geometry.mean_curvature) / h
    } else {
        0.0
    };
    let values = PointValues {
        characterization_gap: sample.b_norm_sq - characterization_target(&sample),
        general: ResidualSummary::of(&general),
        specialized,
        specialized_error,
        signed_normal_residual: signed,
        sample,
    };
    if !values_finite(&values) {
        return fail("non-finite geometric quantity".into());
    }
    PointRecord { index, u: u.to_vec(), values: Some(values), error: None }
}

fn values_finite(v: &PointValues) -> bool {
    let s = &v.sample;
    let mut xs = vec![
        s.h_norm,
        s.b_norm_sq,
        s.nabla_h_norm,
        s.scalar_intrinsic,
        s.scalar_via_gauss,
        s.ambient_sectional_sum,
        v.general.normal_norm,
        v.general.tangential_norm,
        v.signed_normal_residual,
        v.characterization_gap,
    ];
    if let Some(sp) = &v.specialized {
        xs.extend([sp.theorem.max_norm(), sp.active.max_norm(), sp.gap]);
    }
    xs.extend(s.pseudo_umbilical_deviation);
    xs.iter().all(|x| x.is_finite())
}

/// Evaluates every grid point; order follows the grid regardless of the
/// thread count.
pub fn evaluate_points(cfg: &ScenarioConfig, opts: &RunOptions) -> Vec<PointRecord> {
    let grid = cfg.immersion.domain.grid();
    opts.install(|| grid.par_iter().enumerate().map(|(i, u)| evaluate_point(cfg, i, u)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Consensus {
    True,
    False,
    NotApplicable,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub evaluated_points: usize,
    pub failed_points: usize,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub max_residual_general: f64,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub mean_residual_general: f64,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub max_residual_specialized: f64,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub max_h: f64,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub min_h: f64,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub mean_h: f64,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub max_b_norm_sq: f64,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub min_b_norm_sq: f64,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub max_specialization_gap: f64,
    pub cmc: CmcStatus,
    pub classification: BTreeMap<String, Consensus>,
    pub active_branches: Vec<Branch>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub name: String,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub label: String,
    pub op: String,
    pub verdict: String,
    pub headline: Option<Headline>,
    pub details: Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub label: String,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub matched: bool,
    pub mismatches: Vec<Mismatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineMetadata {
    pub engine: String,
    pub version: String,
    pub residual_tolerance: f64,
    pub minimal_tolerance: f64,
    pub cmc_tolerance: f64,
    pub flag_tolerance: f64,
    pub immersion_jet_order: usize,
    pub ambient: String,
    pub ambient_kind: AmbientKind,
    pub ambient_dim: usize,
    pub immersion: String,
    pub dim: usize,
    pub grid: Domain,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub name: String,
    pub config: ScenarioDocument,
    pub engine: EngineMetadata,
    pub points: Vec<PointRecord>,
    pub aggregates: Aggregates,
    pub checks: Vec<CheckResult>,
    pub expectation: Option<Expectation>,
}

impl Report {
    pub fn check(&self, label: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.label == label)
    }

    /// Whether every expectation in the config held (vacuously true without
    /// an `expect` block).
    pub fn expectations_met(&self) -> bool {
        self.expectation.as_ref().map_or(true, |e| e.matched)
    }
}

fn ok_values(points: &[PointRecord]) -> Vec<&PointValues> {
    points.iter().filter_map(|p| p.values.as_ref()).collect()
}

fn fold_max(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(f64::NAN, f64::max)
}

fn fold_min(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(f64::NAN, f64::min)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn flag_consensus(values: &[&PointValues]) -> BTreeMap<String, Consensus> {
    let mut out: BTreeMap<String, Consensus> = BTreeMap::new();
    for v in values {
        let Ok(Json::Object(map)) = serde_json::to_value(v.sample.flags) else { continue };
        for (name, val) in map {
            let c = match &val {
                Json::Bool(true) => Consensus::True,
                Json::Bool(false) => Consensus::False,
                Json::Object(f) => match f.get("value") {
                    Some(Json::Bool(true)) => Consensus::True,
                    Some(Json::Bool(false)) => Consensus::False,
                    _ => Consensus::NotApplicable,
                },
                _ => Consensus::NotApplicable,
            };
            out.entry(name).and_modify(|prev| if *prev != c { *prev = Consensus::Mixed }).or_insert(c);
        }
    }
    out
}

pub fn aggregate(points: &[PointRecord]) -> Aggregates {
    let values = ok_values(points);
    let samples: Vec<GridSample> = values.iter().map(|v| v.sample.clone()).collect();
    let general: Vec<f64> = values.iter().map(|v| v.general.max_norm()).collect();
    let hs: Vec<f64> = values.iter().map(|v| v.sample.h_norm).collect();
    let max_residual_general = fold_max(general.iter().copied());
    let max_h = fold_max(hs.iter().copied());
    let branches: BTreeSet<Branch> =
        values.iter().filter_map(|v| v.specialized.as_ref().map(|s| s.active.branch)).collect();
    let specialized_max = if values.iter().all(|v| v.specialized.is_some()) {
        fold_max(values.iter().filter_map(|v| v.specialized.as_ref()).map(|s| s.active.max_norm()))
    } else {
        f64::NAN
    };
    let overall = if values.is_empty() { Verdict::Undetermined } else { verdict(max_residual_general, max_h) };
    Aggregates {
        evaluated_points: values.len(),
        failed_points: points.len() - values.len(),
        max_residual_general,
        mean_residual_general: mean(&general),
        max_residual_specialized: specialized_max,
        max_h,
        min_h: fold_min(hs.iter().copied()),
        mean_h: mean(&hs),
        max_b_norm_sq: fold_max(values.iter().map(|v| v.sample.b_norm_sq)),
        min_b_norm_sq: fold_min(values.iter().map(|v| v.sample.b_norm_sq)),
        max_specialization_gap: if values.iter().all(|v| v.specialized.is_some()) {
            fold_max(values.iter().filter_map(|v| v.specialized.as_ref()).map(|s| s.gap))
        } else {
            f64::NAN
        },
        cmc: cmc_status(&samples),
        classification: flag_consensus(&values),
        active_branches: branches.into_iter().collect(),
        verdict: overall,
    }
}

fn headline(name: &str, value: f64) -> Option<Headline> {
    Some(Headline { name: name.to_string(), value })
}

fn result(spec: &CheckSpec, verdict: impl Into<String>, head: Option<Headline>, details: Json) -> CheckResult {
    CheckResult { label: spec.label(), op: spec.kind.op().to_string(), verdict: verdict.into(), headline: head, details }
}

fn verdict_name(v: Verdict) -> String {
    format!("{v:?}")
}

fn residual_check(
    spec: &CheckSpec,
    points: &[PointRecord],
    pick: impl Fn(&PointValues) -> Option<&ResidualSummary>,
) -> CheckResult {
    let picked: Vec<(&ResidualSummary, f64)> =
        ok_values(points).into_iter().filter_map(|v| pick(v).map(|r| (r, v.sample.h_norm))).collect();
    let missing = points.len() - picked.len();
    let max_normal = fold_max(picked.iter().map(|(r, _)| r.normal_norm));
    let max_tangential = fold_max(picked.iter().map(|(r, _)| r.tangential_norm));
    let norms: Vec<f64> = picked.iter().map(|(r, _)| r.max_norm()).collect();
    let max_residual = fold_max(norms.iter().copied());
    let max_h = fold_max(picked.iter().map(|(_, h)| *h));
    let branches: BTreeSet<Branch> = picked.iter().map(|(r, _)| r.branch).collect();
    let v = if picked.is_empty() { Verdict::Undetermined } else { verdict(max_residual, max_h) };
    let details = json!({
        "max_normal": max_normal,
        "max_tangential": max_tangential,
        "max_residual": max_residual,
        "mean_residual": mean(&norms),
        "max_h": max_h,
        "evaluated_points": picked.len(),
        "unevaluated_points": missing,
        "branches": branches.iter().map(|b| b.to_string()).collect::<Vec<_>>(),
    });
    result(spec, verdict_name(v), headline("max_residual", max_residual), details)
}

fn tol_or(t: &Option<f64>, default: f64) -> f64 {
    t.unwrap_or(default)
}

fn run_one(cfg: &ScenarioConfig, spec: &CheckSpec, points: &[PointRecord], agg: &Aggregates, opts: &RunOptions) -> CheckResult {
    let values = ok_values(points);
    let samples: Vec<GridSample> = values.iter().map(|v| v.sample.clone()).collect();
    match &spec.kind {
        CheckKind::ResidualGeneral => residual_check(spec, points, |v| Some(&v.general)),
        CheckKind::ResidualGcsf | CheckKind::ResidualGssf => {
            residual_check(spec, points, |v| v.specialized.as_ref().map(|s| &s.active))
        }
        CheckKind::Specialization { tol } => {
            let tol = tol_or(tol, 1e-8);
            let gaps: Vec<f64> = values.iter().filter_map(|v| v.specialized.as_ref().map(|s| s.gap)).collect();
            let max_gap = fold_max(gaps.iter().copied());
            let v = if gaps.is_empty() || gaps.len() < points.len() {
                "Undetermined"
            } else if max_gap <= tol {
                "Coherent"
            } else {
                "Incoherent"
            };
            let errors: BTreeSet<&str> = values.iter().filter_map(|v| v.specialized_error.as_deref()).collect();
            let details = json!({
                "tolerance": tol,
                "max_gap": max_gap,
                "compared_points": gaps.len(),
                "branches": agg.active_branches.iter().map(|b| b.to_string()).collect::<Vec<_>>(),
                "errors": errors,
            });
            result(spec, v, headline("max_gap", max_gap), details)
        }
        CheckKind::Gauss { tol } => {
            let tol = tol_or(tol, 1e-6);
            let gap = fold_max(values.iter().map(|v| (v.sample.scalar_intrinsic - v.sample.scalar_via_gauss).abs()));
            let identity = (cfg.ambient.kind == AmbientKind::GeneralizedComplex && cfg.immersion.dim() == 3).then(|| {
                fold_max(values.iter().map(|v| {
                    let s = &v.sample;
                    let target = characterization_target(s) * 2.0 - s.b_norm_sq + 9.0 * s.h_norm * s.h_norm;
                    (s.scalar_via_gauss - target).abs()
                }))
            });
            let identity_ok = identity.map(|g| g <= 1e-8);
            let v = if values.is_empty() {
                "Undetermined"
            } else if cfg.ambient.certified {
                if gap <= tol && identity_ok != Some(false) {
                    "Agree"
                } else {
                    "Disagree"
                }
            } else {
                match identity_ok {
                    Some(true) => "Agree",
                    Some(false) => "Disagree",
                    None => "NotApplicable",
                }
            };
            let mut notes = Vec::new();
            if !cfg.ambient.certified {
                notes.push("ambient curvature is not derived from its metric; intrinsic comparison skipped");
            }
            let details = json!({
                "tolerance": tol,
                "certified_ambient": cfg.ambient.certified,
                "max_gap": if cfg.ambient.certified { gap } else { f64::NAN },
                "identity_gap": identity,
                "notes": notes,
            });
            let head = if cfg.ambient.certified { gap } else { identity.unwrap_or(f64::NAN) };
            result(spec, v, headline("max_gap", head), details)
        }
        CheckKind::CmcCharacterization { tol } => {
            let cv = cmc_characterization(cfg.ambient.kind, &samples, tol_or(tol, 1e-5));
            let residual_v = active_verdict(agg, &values);
            let consistent = match cv.verdict {
                CharacterizationOutcome::Satisfied => residual_v == Verdict::ProperBiharmonic,
                CharacterizationOutcome::Violated => residual_v != Verdict::ProperBiharmonic,
                CharacterizationOutcome::NotApplicable => true,
            };
            let gap = cv.gap;
            let v = format!("{:?}", cv.verdict);
            let details = json!({
                "characterization": cv,
                "residual_verdict": verdict_name(residual_v),
                "consistent_with_residual": consistent,
            });
            result(spec, v, headline("gap", gap), details)
        }
        CheckKind::BoundCheck { kind, tol } => {
            let br: BoundReport = bound_check(*kind, &samples, tol_or(tol, 1e-6));
            let v = if !br.applicable {
                "NotApplicable"
            } else if br.equality {
                "Equality"
            } else if br.within_bound {
                "WithinBound"
            } else {
                "Exceeded"
            };
            let head = headline("measured_h_sq", br.measured_h_sq);
            result(spec, v, head, json!({ "bound": br, "residual_verdict": verdict_name(active_verdict(agg, &values)) }))
        }
        CheckKind::NonexistenceAudit => {
            let audits = nonexistence_audit(&cfg.ambient, &samples);
            let applies = audits.iter().any(|a| a.applies);
            let proper = agg.cmc.is_cmc && active_verdict(agg, &values) == Verdict::ProperBiharmonic;
            let v = match (applies, proper) {
                (true, true) => "Contradiction",
                (true, false) => "Consistent",
                (false, _) => "NotApplicable",
            };
            let applying: Vec<&str> = audits.iter().filter(|a| a.applies).map(|a| a.name.as_str()).collect();
            let details = json!({ "audits": audits, "applying": applying, "cmc_proper_biharmonic": proper });
            result(spec, v, None, details)
        }
        CheckKind::Classification => {
            let mixed = agg.classification.values().any(|c| *c == Consensus::Mixed);
            let v = if values.is_empty() {
                "Undetermined"
            } else if mixed {
                "Mixed"
            } else {
                "Consistent"
            };
            let xi_consistent = values.iter().all(|v| v.sample.flags.xi_normal_consistent());
            let details = json!({ "consensus": agg.classification, "xi_normal_consistent": xi_consistent });
            result(spec, v, None, details)
        }
        CheckKind::PseudoUmbilical { tol } => {
            let tol = tol_or(tol, 1e-6);
            let devs: Vec<Option<f64>> = values.iter().map(|v| v.sample.pseudo_umbilical_deviation).collect();
            let max_dev = fold_max(devs.iter().flatten().copied());
            let max_nabla = fold_max(values.iter().map(|v| v.sample.nabla_h_norm));
            let v = if values.is_empty() || devs.iter().all(Option::is_none) {
                "NotApplicable"
            } else if devs.iter().all(|d| d.is_some_and(|d| d <= tol)) {
                "PseudoUmbilical"
            } else {
                "NotPseudoUmbilical"
            };
            let details = json!({
                "tolerance": tol,
                "max_deviation": max_dev,
                "minimal_points": devs.iter().filter(|d| d.is_none()).count(),
                "max_nabla_h": max_nabla,
                "parallel_h": !values.is_empty() && max_nabla <= tol,
            });
            result(spec, v, headline("max_deviation", max_dev), details)
        }
        CheckKind::Oracle { steps, min_order } => {
            let steps = steps.clone().unwrap_or_else(|| DEFAULT_STEPS.to_vec());
            let min_order = min_order.unwrap_or(ORACLE_MIN_ORDER);
            let conv: ConvergenceReport = convergence_with(cfg, &steps, opts);
            let v = if !conv.applicable {
                "NotApplicable"
            } else if conv.min_order.is_some_and(|o| o >= min_order) {
                "Converged"
            } else if conv.min_order.is_none() && conv.failed_points == 0 {
                "Exact"
            } else {
                "NotConverged"
            };
            let head = headline("min_order", conv.min_order.unwrap_or(f64::NAN));
            result(spec, v, head, json!({ "min_order_required": min_order, "convergence": conv }))
        }
    }
}

/// Verdict of the specialized residual when available at every point, else
/// of the general split.
fn active_verdict(agg: &Aggregates, values: &[&PointValues]) -> Verdict {
    if values.is_empty() {
        Verdict::Undetermined
    } else if agg.max_residual_specialized.is_finite() {
        verdict(agg.max_residual_specialized, agg.max_h)
    } else {
        agg.verdict
    }
}

fn expectation(cfg: &ScenarioConfig, agg: &Aggregates, checks: &[CheckResult]) -> Option<Expectation> {
    if cfg.expect.is_empty() {
        return None;
    }
    let mismatches: Vec<Mismatch> = cfg
        .expect
        .iter()
        .filter_map(|(label, expected)| {
            let actual = if label == "verdict" {
                verdict_name(agg.verdict)
            } else {
                checks.iter().find(|c| &c.label == label).map_or_else(|| "Missing".to_string(), |c| c.verdict.clone())
            };
            (&actual != expected).then(|| Mismatch { label: label.clone(), expected: expected.clone(), actual })
        })
        .collect();
    Some(Expectation { matched: mismatches.is_empty(), mismatches })
}

pub fn engine_metadata(cfg: &ScenarioConfig) -> EngineMetadata {
    let grid = cfg.immersion.domain.clone();
    EngineMetadata {
        engine: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        residual_tolerance: RESIDUAL_TOLERANCE,
        minimal_tolerance: MINIMAL_TOLERANCE,
        cmc_tolerance: CMC_TOLERANCE,
        flag_tolerance: DEFAULT_TOLERANCE,
        immersion_jet_order: IMMERSION_ORDER,
        ambient: cfg.ambient.name.clone(),
        ambient_kind: cfg.ambient.kind,
        ambient_dim: cfg.ambient.dim,
        immersion: cfg.immersion.name.clone(),
        dim: cfg.immersion.dim(),
        grid_points: grid.samples.iter().product(),
        grid,
    }
}

pub fn run_check(cfg: &ScenarioConfig) -> Report {
    run_check_with(cfg, &RunOptions::default())
}

pub fn run_check_with(cfg: &ScenarioConfig, opts: &RunOptions) -> Report {
    let points = evaluate_points(cfg, opts);
    let aggregates = aggregate(&points);
    let checks: Vec<CheckResult> = cfg.checks.iter().map(|c| run_one(cfg, c, &points, &aggregates, opts)).collect();
    Report {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        config: cfg.document.clone(),
        engine: engine_metadata(cfg),
        expectation: expectation(cfg, &aggregates, &checks),
        points,
        aggregates,
        checks,
    }
}
