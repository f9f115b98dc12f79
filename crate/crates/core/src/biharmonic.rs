//! Biharmonicity residuals, characterizations, bounds and non-existence
//! audits for submanifolds of generalized complex and Sasakian space forms.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambient::{AmbientKind, AmbientModel, AmbientState, ClassicalTag, PointCoefficients};
use crate::structure::{classify, decompose, ClassificationFlags, DecompositionOperators, Frames, StructureError};
use crate::submanifold::{
    analyze, pseudo_umbilical_check, scalar_curvature, ImmersionModel, NormalFieldDerivatives, PointGeometry,
    SubmanifoldError,
};

/// Residual norms below this count as vanishing in verdicts.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;
/// `|H|` above this counts as non-minimal.
pub const MINIMAL_TOLERANCE: f64 = 1e-6;
/// Relative spread of `|H|` allowed on a CMC grid.
pub const CMC_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum BiharmonicError {
    #[error("{operation} needs a {expected:?} ambient, got {found:?}")]
    WrongKind { operation: &'static str, expected: AmbientKind, found: AmbientKind },
    #[error("{operation} needs dimension below 4, got {m}")]
    DimensionTooLarge { operation: &'static str, m: usize },
    #[error("intrinsic dimension must be at least 1")]
    ZeroDimension,
    #[error("unknown space form class '{0}'")]
    UnknownClass(String),
    #[error(transparent)]
    Geometry(#[from] SubmanifoldError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Branch {
    GeneralSplit,
    #[serde(rename = "GCSF_Theorem1")]
    GcsfTheorem1,
    #[serde(rename = "GCSF_Hypersurface")]
    GcsfHypersurface,
    #[serde(rename = "GCSF_Complex")]
    GcsfComplex,
    #[serde(rename = "GCSF_Lagrangian")]
    GcsfLagrangian,
    #[serde(rename = "GCSF_Curve")]
    GcsfCurve,
    #[serde(rename = "GSSF_Theorem2")]
    GssfTheorem2,
    #[serde(rename = "GSSF_Invariant")]
    GssfInvariant,
    #[serde(rename = "GSSF_AntiInvariant")]
    GssfAntiInvariant,
    #[serde(rename = "GSSF_XiNormal")]
    GssfXiNormal,
    #[serde(rename = "GSSF_XiTangent")]
    GssfXiTangent,
    #[serde(rename = "GSSF_Hypersurface")]
    GssfHypersurface,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Normal,
    Tangential,
}

/// One summand of a residual equation, written so that the summands add up
/// to the residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualTerm {
    pub part: Part,
    pub label: String,
    pub vector: Vec<f64>,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiharmonicResidual {
    pub branch: Branch,
    pub normal: Vec<f64>,
    pub tangential: Vec<f64>,
    pub normal_norm: f64,
    pub tangential_norm: f64,
    pub terms: Vec<ResidualTerm>,
}

impl BiharmonicResidual {
    pub fn max_norm(&self) -> f64 {
        self.normal_norm.max(self.tangential_norm)
    }

    /// Largest difference to another residual, part by part.
    pub fn distance(&self, other: &BiharmonicResidual) -> f64 {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        d(&self.normal, &other.normal).max(d(&self.tangential, &other.tangential))
    }
}

struct Builder<'a> {
    st: &'a AmbientState,
    terms: Vec<(Part, String, DVector<f64>)>,
}

impl<'a> Builder<'a> {
    fn new(st: &'a AmbientState) -> Self {
        Builder { st, terms: Vec::new() }
    }

    fn normal(mut self, label: &str, v: DVector<f64>) -> Self {
        self.terms.push((Part::Normal, label.to_string(), v));
        self
    }

    fn tangential(mut self, label: &str, v: DVector<f64>) -> Self {
        self.terms.push((Part::Tangential, label.to_string(), v));
        self
    }

    fn finish(self, branch: Branch) -> BiharmonicResidual {
        let n = self.st.ncoords();
        let mut normal = DVector::zeros(n);
        let mut tangential = DVector::zeros(n);
        let mut terms = Vec::with_capacity(self.terms.len());
        for (part, label, v) in self.terms {
            match part {
                Part::Normal => normal += &v,
                Part::Tangential => tangential += &v,
            }
            terms.push(ResidualTerm { part, label, norm: self.st.norm(&v), vector: v.iter().copied().collect() });
        }
        BiharmonicResidual {
            branch,
            normal_norm: self.st.norm(&normal),
            tangential_norm: self.st.norm(&tangential),
            normal: normal.iter().copied().collect(),
            tangential: tangential.iter().copied().collect(),
            terms,
        }
    }
}

/// Everything the residuals need at one parameter point.
#[derive(Debug, Clone)]
pub struct PointData {
    pub geometry: PointGeometry,
    pub derivatives: NormalFieldDerivatives,
    pub operators: DecompositionOperators,
    pub flags: ClassificationFlags,
    /// `sum_i R(X_i, H) X_i` over the tangent frame.
    pub curvature_trace: DVector<f64>,
}

pub fn point_data(space: &AmbientModel, imm: &ImmersionModel, u: &[f64], tol: f64) -> Result<PointData, BiharmonicError> {
    let (pg, nd) = analyze(space, imm, u)?;
    let operators = decompose(&pg.state, &pg.frames)?;
    let flags = classify(&operators, (pg.dim(), space.dim), &pg.h_normal(), tol);
    let curvature_trace = curvature_trace(&pg.state, &pg.frames, &pg.mean_curvature);
    Ok(PointData { geometry: pg, derivatives: nd, operators, flags, curvature_trace })
}

pub fn curvature_trace(st: &AmbientState, frames: &Frames, h: &DVector<f64>) -> DVector<f64> {
    frames.tangent.iter().fold(DVector::zeros(st.ncoords()), |acc, x| acc + st.curvature(x, h, x))
}

fn tangent_part(st: &AmbientState, frames: &Frames, v: &DVector<f64>) -> DVector<f64> {
    frames.tangent_vector(&frames.tangent_coords(st, v))
}

fn normal_part(st: &AmbientState, frames: &Frames, v: &DVector<f64>) -> DVector<f64> {
    frames.normal_vector(&frames.normal_coords(st, v))
}

/// The left-hand sides shared by every form of the equations.
fn common_terms<'a>(pg: &'a PointGeometry, nd: &NormalFieldDerivatives) -> Builder<'a> {
    let m = pg.dim() as f64;
    Builder::new(&pg.state)
        .normal("-lap_perp_H", -&nd.laplacian_h)
        .normal("trace_B_AH", nd.trace_b_ah.clone())
        .tangential("m/2 grad|H|^2", &nd.grad_h_sq * (m / 2.0))
        .tangential("2 trace_A_nabla_H", &nd.trace_a_nabla_h * 2.0)
}

/// Normal and tangential parts of the bitension field.
pub fn residual_general(pg: &PointGeometry, nd: &NormalFieldDerivatives, trace: &DVector<f64>) -> BiharmonicResidual {
    let st = &pg.state;
    common_terms(pg, nd)
        .normal("curvature_trace_normal", normal_part(st, &pg.frames, trace))
        .tangential("2 curvature_trace_tangent", tangent_part(st, &pg.frames, trace) * 2.0)
        .finish(Branch::GeneralSplit)
}

/// A theorem-level residual and the corollary branches whose hypotheses hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecializedResidual {
    pub theorem: BiharmonicResidual,
    pub branches: Vec<BiharmonicResidual>,
}

impl SpecializedResidual {
    /// The most specific active branch, or the theorem form.
    pub fn active(&self) -> &BiharmonicResidual {
        self.branches.last().unwrap_or(&self.theorem)
    }
}

fn require_kind(op: &'static str, space_kind: AmbientKind, expected: AmbientKind) -> Result<(), BiharmonicError> {
    if space_kind != expected {
        return Err(BiharmonicError::WrongKind { operation: op, expected, found: space_kind });
    }
    Ok(())
}

/// Residuals in a generalized complex space form `N(alpha, beta)`.
pub fn residual_gcsf(pd: &PointData) -> Result<SpecializedResidual, BiharmonicError> {
    require_kind("residual_gcsf", pd.operators.kind, AmbientKind::GeneralizedComplex)?;
    let pg = &pd.geometry;
    let nd = &pd.derivatives;
    let m = pg.dim();
    if m >= 4 {
        return Err(BiharmonicError::DimensionTooLarge { operation: "residual_gcsf", m });
    }
    let PointCoefficients::Complex { alpha, beta } = pg.state.coefficients else {
        unreachable!("complex ambient carries complex coefficients")
    };
    let ops = &pd.operators;
    let frames = &pg.frames;
    let h = &pg.mean_curvature;
    let hn = pg.h_normal();
    let lh = &ops.normal_tangent * &hn;
    let klh = frames.normal_vector(&(&ops.tangent_normal * &lh));
    let jlh = frames.tangent_vector(&(&ops.tangent_tangent * &lh));
    let mf = m as f64;

    let theorem = common_terms(pg, nd)
        .normal("-m alpha H", h * (-mf * alpha))
        .normal("3 beta klH", &klh * (3.0 * beta))
        .tangential("6 beta jlH", &jlh * (6.0 * beta))
        .finish(Branch::GcsfTheorem1);

    let f = &pd.flags;
    let mut branches = Vec::new();
    if f.is_hypersurface {
        branches.push(common_terms(pg, nd).normal("-3(alpha+beta) H", h * (-3.0 * (alpha + beta))).finish(Branch::GcsfHypersurface));
    } else if m == 2 && f.is_complex.holds() {
        branches.push(common_terms(pg, nd).normal("-2 alpha H", h * (-2.0 * alpha)).finish(Branch::GcsfComplex));
    } else if m == 2 && f.is_lagrangian.holds() {
        branches.push(
            common_terms(pg, nd)
                .normal("-2 alpha H", h * (-2.0 * alpha))
                .normal("-3 beta H", h * (-3.0 * beta))
                .finish(Branch::GcsfLagrangian),
        );
    } else if f.is_curve {
        let m2h = frames.normal_vector(&(&ops.normal_normal * (&ops.normal_normal * &hn)));
        branches.push(
            common_terms(pg, nd)
                .normal("-alpha H", h * (-alpha))
                .normal("-3 beta (H + m^2 H)", (h + m2h) * (-3.0 * beta))
                .finish(Branch::GcsfCurve),
        );
    }
    Ok(SpecializedResidual { theorem, branches })
}

/// Residuals in a generalized Sasakian space form `M(f1, f2, f3)`.
pub fn residual_gssf(pd: &PointData) -> Result<SpecializedResidual, BiharmonicError> {
    require_kind("residual_gssf", pd.operators.kind, AmbientKind::GeneralizedSasakian)?;
    let pg = &pd.geometry;
    let nd = &pd.derivatives;
    let st = &pg.state;
    let PointCoefficients::Contact { f1, f2, f3 } = st.coefficients else {
        unreachable!("contact ambient carries contact coefficients")
    };
    let ops = &pd.operators;
    let frames = &pg.frames;
    let h = &pg.mean_curvature;
    let n = pg.dim() as f64;
    let xi_t_coords = ops.xi_tangent.clone().expect("contact decomposition");
    let xi_top = frames.tangent_vector(&xi_t_coords);
    let xi_perp = frames.normal_vector(ops.xi_normal.as_ref().expect("contact decomposition"));
    let xi_top_sq = xi_t_coords.norm_squared();
    let eta_h = st.eta(h);
    let th = &ops.normal_tangent * pg.h_normal();
    let nth = frames.normal_vector(&(&ops.tangent_normal * &th));
    let pth = frames.tangent_vector(&(&ops.tangent_tangent * &th));

    let theorem = common_terms(pg, nd)
        .normal("-n f1 H", h * (-n * f1))
        .normal("f2 |xi_top|^2 H", h * (f2 * xi_top_sq))
        .normal("n f2 eta(H) xi_perp", &xi_perp * (n * f2 * eta_h))
        .normal("3 f3 NtH", &nth * (3.0 * f3))
        .tangential("2 f2 (n-1) eta(H) xi_top", &xi_top * (2.0 * f2 * (n - 1.0) * eta_h))
        .tangential("6 f3 PtH", &pth * (6.0 * f3))
        .finish(Branch::GssfTheorem2);

    let f = &pd.flags;
    let mut branches = Vec::new();
    if f.is_invariant.holds() {
        branches.push(
            common_terms(pg, nd)
                .normal("-n f1 H", h * (-n * f1))
                .normal("f2 |xi_top|^2 H", h * (f2 * xi_top_sq))
                .normal("n f2 eta(H) xi_perp", &xi_perp * (n * f2 * eta_h))
                .tangential("2 f2 (n-1) eta(H) xi_top", &xi_top * (2.0 * f2 * (n - 1.0) * eta_h))
                .tangential("6 f3 PtH", &pth * (6.0 * f3))
                .finish(Branch::GssfInvariant),
        );
    }
    if f.is_anti_invariant.holds() {
        branches.push(
            common_terms(pg, nd)
                .normal("-n f1 H", h * (-n * f1))
                .normal("f2 |xi_top|^2 H", h * (f2 * xi_top_sq))
                .normal("n f2 eta(H) xi_perp", &xi_perp * (n * f2 * eta_h))
                .normal("3 f3 NtH", &nth * (3.0 * f3))
                .tangential("2 f2 (n-1) eta(H) xi_top", &xi_top * (2.0 * f2 * (n - 1.0) * eta_h))
                .finish(Branch::GssfAntiInvariant),
        );
    }
    if f.xi_normal.holds() && f.is_anti_invariant.holds() {
        let xi = st.xi().expect("contact structure");
        branches.push(
            common_terms(pg, nd)
                .normal("-n f1 H", h * (-n * f1))
                .normal("n f2 eta(H) xi", xi * (n * f2 * eta_h))
                .normal("3 f3 NtH", &nth * (3.0 * f3))
                .finish(Branch::GssfXiNormal),
        );
    }
    if f.xi_tangent.holds() {
        branches.push(
            common_terms(pg, nd)
                .normal("-n f1 H", h * (-n * f1))
                .normal("f2 H", h * f2)
                .normal("3 f3 NtH", &nth * (3.0 * f3))
                .tangential("6 f3 PtH", &pth * (6.0 * f3))
                .finish(Branch::GssfXiTangent),
        );
    }
    if f.is_hypersurface {
        branches.push(
            common_terms(pg, nd)
                .normal("-(n f1 + 3 f3) H", h * (-(n * f1 + 3.0 * f3)))
                .normal("f2 |xi_top|^2 H", h * (f2 * xi_top_sq))
                .normal("(n f2 + 3 f3) eta(H) xi_perp", &xi_perp * ((n * f2 + 3.0 * f3) * eta_h))
                .tangential("(2(n-1) f2 + 6 f3) eta(H) xi_top", &xi_top * ((2.0 * (n - 1.0) * f2 + 6.0 * f3) * eta_h))
                .finish(Branch::GssfHypersurface),
        );
    }
    Ok(SpecializedResidual { theorem, branches })
}

/// Theorem and branch residuals for the ambient kind at hand.
pub fn residual_specialized(pd: &PointData) -> Result<SpecializedResidual, BiharmonicError> {
    match pd.operators.kind {
        AmbientKind::GeneralizedComplex => residual_gcsf(pd),
        AmbientKind::GeneralizedSasakian => residual_gssf(pd),
    }
}

/// Largest distance between the general split residual and the theorem or
/// any active branch residual.
pub fn specialization_gap(general: &BiharmonicResidual, special: &SpecializedResidual) -> f64 {
    std::iter::once(&special.theorem).chain(&special.branches).map(|r| r.distance(general)).fold(0.0, f64::max)
}

/// `sum_i R2(X_i, H) X_i` written through the structure blocks: `3 jlH + 3 klH`.
pub fn r2_trace_from_operators(ops: &DecompositionOperators, frames: &Frames, h_normal: &DVector<f64>) -> DVector<f64> {
    let lh = &ops.normal_tangent * h_normal;
    (frames.tangent_vector(&(&ops.tangent_tangent * &lh)) + frames.normal_vector(&(&ops.tangent_normal * &lh))) * 3.0
}

pub fn r2_trace(st: &AmbientState, frames: &Frames, h: &DVector<f64>) -> DVector<f64> {
    frames.tangent.iter().fold(DVector::zeros(st.ncoords()), |acc, x| acc + st.r2(x, h, x))
}

/// `sum_i R*(X_i, H) X_i` through the structure blocks:
/// `-n f1 H + f2(|xi_top|^2 H - eta(H) xi_top + n eta(H) xi) + 3 f3 (PtH + NtH)`.
pub fn contact_trace_from_operators(
    st: &AmbientState,
    ops: &DecompositionOperators,
    frames: &Frames,
    h: &DVector<f64>,
) -> DVector<f64> {
    let PointCoefficients::Contact { f1, f2, f3 } = st.coefficients else {
        panic!("contact coefficients expected")
    };
    let n = frames.tangent.len() as f64;
    let xi_t = ops.xi_tangent.clone().expect("contact decomposition");
    let xi_top = frames.tangent_vector(&xi_t);
    let xi = st.xi().expect("contact structure");
    let eta_h = st.eta(h);
    let th = &ops.normal_tangent * frames.normal_coords(st, h);
    let pth = frames.tangent_vector(&(&ops.tangent_tangent * &th));
    let nth = frames.normal_vector(&(&ops.tangent_normal * &th));
    h * (-n * f1) + (h * xi_t.norm_squared() - xi_top * eta_h + xi * (n * eta_h)) * f2 + (pth + nth) * (3.0 * f3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    ProperBiharmonic,
    MinimalHenceBiharmonic,
    NotBiharmonic,
    /// No point could be evaluated.
    Undetermined,
}

/// Verdict from grid maxima of the residual norms and of `|H|`.
pub fn verdict(max_residual: f64, max_h: f64) -> Verdict {
    if !max_residual.is_finite() {
        Verdict::Undetermined
    } else if max_residual >= RESIDUAL_TOLERANCE {
        Verdict::NotBiharmonic
    } else if max_h > MINIMAL_TOLERANCE {
        Verdict::ProperBiharmonic
    } else {
        Verdict::MinimalHenceBiharmonic
    }
}

/// Scalar summary of one grid point, enough for grid-level propositions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSample {
    pub u: Vec<f64>,
    pub m: usize,
    pub h_norm: f64,
    pub b_norm_sq: f64,
    pub nabla_h_norm: f64,
    pub pseudo_umbilical_deviation: Option<f64>,
    pub scalar_intrinsic: f64,
    pub scalar_via_gauss: f64,
    /// `sum_ij <R(X_i, X_j) X_j, X_i>` over the tangent frame.
    pub ambient_sectional_sum: f64,
    pub coefficients: PointCoefficients,
    pub flags: ClassificationFlags,
}

impl GridSample {
    pub fn from_point(pd: &PointData) -> Result<GridSample, BiharmonicError> {
        let pg = &pd.geometry;
        let m = pg.dim();
        let (intrinsic, via_gauss) = scalar_curvature(pg)?;
        let h = pg.h_norm();
        let b = pg.b_norm_sq();
        Ok(GridSample {
            u: pg.u.clone(),
            m,
            h_norm: h,
            b_norm_sq: b,
            nabla_h_norm: pd.derivatives.nabla_h.iter().map(|v| pg.state.inner(v, v)).sum::<f64>().sqrt(),
            pseudo_umbilical_deviation: pseudo_umbilical_check(pg, MINIMAL_TOLERANCE).map(|(_, d)| d),
            scalar_intrinsic: intrinsic,
            scalar_via_gauss: via_gauss,
            ambient_sectional_sum: via_gauss - (m * m) as f64 * h * h + b,
            coefficients: pg.state.coefficients,
            flags: pd.flags,
        })
    }

    /// `m f1 - f2 + 3 f3` in contact ambients.
    pub fn k_value(&self) -> Option<f64> {
        match self.coefficients {
            PointCoefficients::Contact { f1, f2, f3 } => Some(self.m as f64 * f1 - f2 + 3.0 * f3),
            PointCoefficients::Complex { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmcStatus {
    pub is_cmc: bool,
    pub nonzero: bool,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub spread: f64,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub max_h: f64,
}

pub fn cmc_status(samples: &[GridSample]) -> CmcStatus {
    let max_h = samples.iter().map(|s| s.h_norm).fold(f64::NEG_INFINITY, f64::max);
    let min_h = samples.iter().map(|s| s.h_norm).fold(f64::INFINITY, f64::min);
    let spread = max_h - min_h;
    CmcStatus {
        is_cmc: !samples.is_empty() && spread < CMC_TOLERANCE * (1.0 + max_h),
        nonzero: !samples.is_empty() && min_h > MINIMAL_TOLERANCE,
        spread: if samples.is_empty() { f64::NAN } else { spread },
        max_h: if samples.is_empty() { f64::NAN } else { max_h },
    }
}

fn all(samples: &[GridSample], pred: impl Fn(&GridSample) -> bool) -> bool {
    !samples.is_empty() && samples.iter().all(pred)
}

/// Whether the terms that need `xi` tangent vanish anyway (`f2 = f3 = 0`
/// at every sample).
fn xi_terms_vanish(samples: &[GridSample]) -> bool {
    all(samples, |s| matches!(s.coefficients, PointCoefficients::Contact { f2, f3, .. } if f2.abs() < 1e-14 && f3.abs() < 1e-14))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CharacterizationOutcome {
    Satisfied,
    Violated,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarCrossCheck {
    pub measured: f64,
    pub target: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationVerdict {
    pub quantity: String,
    pub target_formula: String,
    /// Values at the sample with the largest gap.
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub measured: f64,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub target: f64,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub gap: f64,
    pub verdict: CharacterizationOutcome,
    pub hypotheses: BTreeMap<String, bool>,
    pub failed_hypothesis: Option<String>,
    pub notes: Vec<String>,
    pub scalar_cross_check: Option<ScalarCrossCheck>,
}

fn first_failed(hyp: &BTreeMap<String, bool>, order: &[&str]) -> Option<String> {
    order.iter().find(|k| hyp.get(**k) == Some(&false)).map(|k| k.to_string())
}

/// CMC hypersurface characterization: proper biharmonic iff `|B|^2` equals
/// `3(alpha+beta)` (complex) or `m f1 - f2 + 3 f3` (contact, `xi` tangent).
pub fn cmc_characterization(kind: AmbientKind, samples: &[GridSample], tol: f64) -> CharacterizationVerdict {
    let cmc = cmc_status(samples);
    let mut hyp = BTreeMap::new();
    let mut notes = Vec::new();
    hyp.insert("hypersurface".to_string(), all(samples, |s| s.flags.is_hypersurface));
    hyp.insert("cmc".to_string(), cmc.is_cmc);
    hyp.insert("nonzero_h".to_string(), cmc.nonzero);
    let (formula, target_of): (&str, fn(&GridSample) -> f64) = match kind {
        AmbientKind::GeneralizedComplex => ("3(alpha+beta)", |s| match s.coefficients {
            PointCoefficients::Complex { alpha, beta } => 3.0 * (alpha + beta),
            PointCoefficients::Contact { .. } => f64::NAN,
        }),
        AmbientKind::GeneralizedSasakian => {
            let tangent = all(samples, |s| s.flags.xi_tangent.holds());
            let waived = !tangent && xi_terms_vanish(samples);
            if waived {
                notes.push("xi_tangent waived: f2 = f3 = 0 on the grid".to_string());
            }
            hyp.insert("xi_tangent".to_string(), tangent || waived);
            ("m f1 - f2 + 3 f3", |s| s.k_value().unwrap_or(f64::NAN))
        }
    };
    let failed = first_failed(&hyp, &["hypersurface", "xi_tangent", "cmc", "nonzero_h"]);
    let worst = samples
        .iter()
        .map(|s| (s, target_of(s)))
        .max_by(|a, b| (a.0.b_norm_sq - a.1).abs().total_cmp(&(b.0.b_norm_sq - b.1).abs()));
    let (measured, target, gap, cross) = match worst {
        Some((s, t)) => {
            let gap = (s.b_norm_sq - t).abs();
            let m = s.m as f64;
            let scal_target = s.ambient_sectional_sum + m * m * s.h_norm * s.h_norm - t;
            let cross = ScalarCrossCheck {
                measured: s.scalar_intrinsic,
                target: scal_target,
                gap: (s.scalar_intrinsic - scal_target).abs(),
            };
            (s.b_norm_sq, t, gap, Some(cross))
        }
        None => (f64::NAN, f64::NAN, f64::NAN, None),
    };
    let verdict = if failed.is_some() {
        CharacterizationOutcome::NotApplicable
    } else if gap < tol {
        CharacterizationOutcome::Satisfied
    } else {
        CharacterizationOutcome::Violated
    };
    CharacterizationVerdict {
        quantity: "|B|^2".into(),
        target_formula: formula.into(),
        measured,
        target,
        gap,
        verdict,
        hypotheses: hyp,
        failed_hypothesis: failed,
        notes,
        scalar_cross_check: cross,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceFormClass {
    Sasaki,
    Kenmotsu,
    Cosymplectic,
}

impl FromStr for SpaceFormClass {
    type Err = BiharmonicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sasaki" | "sasakian" => Ok(SpaceFormClass::Sasaki),
            "kenmotsu" => Ok(SpaceFormClass::Kenmotsu),
            "cosymplectic" => Ok(SpaceFormClass::Cosymplectic),
            _ => Err(BiharmonicError::UnknownClass(s.to_string())),
        }
    }
}

impl SpaceFormClass {
    pub fn of_tag(tag: ClassicalTag) -> Option<(SpaceFormClass, f64)> {
        match tag {
            ClassicalTag::Sasaki(c) => Some((SpaceFormClass::Sasaki, c)),
            ClassicalTag::Kenmotsu(c) => Some((SpaceFormClass::Kenmotsu, c)),
            ClassicalTag::Cosymplectic(c) => Some((SpaceFormClass::Cosymplectic, c)),
            ClassicalTag::ComplexSpaceForm(_) => None,
        }
    }

    pub fn tag(self, c: f64) -> ClassicalTag {
        match self {
            SpaceFormClass::Sasaki => ClassicalTag::Sasaki(c),
            SpaceFormClass::Kenmotsu => ClassicalTag::Kenmotsu(c),
            SpaceFormClass::Cosymplectic => ClassicalTag::Cosymplectic(c),
        }
    }

    /// Largest `c` with `K(m, c) <= k`.
    pub fn c_threshold(self, m: usize, k: f64) -> f64 {
        let m = m as f64;
        let offset = match self {
            SpaceFormClass::Sasaki => (3.0 * m - 2.0) / 4.0,
            SpaceFormClass::Kenmotsu => -(3.0 * m - 2.0) / 4.0,
            SpaceFormClass::Cosymplectic => 0.0,
        };
        4.0 * (k - offset) / (m + 2.0)
    }
}

/// `K(m, c)` for the classical contact space forms.
pub fn bound_constant_k(class: SpaceFormClass, m: usize, c: f64) -> Result<f64, BiharmonicError> {
    if m == 0 {
        return Err(BiharmonicError::ZeroDimension);
    }
    let mf = m as f64;
    let base = (mf + 2.0) * c / 4.0;
    Ok(match class {
        SpaceFormClass::Sasaki => base + (3.0 * mf - 2.0) / 4.0,
        SpaceFormClass::Kenmotsu => base - (3.0 * mf - 2.0) / 4.0,
        SpaceFormClass::Cosymplectic => base,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    #[serde(rename = "Lagrangian_2a3b")]
    Lagrangian2a3b,
    #[serde(rename = "Complex_2a")]
    Complex2a,
    #[serde(rename = "K_phiH_tangent")]
    KPhiHTangent,
    #[serde(rename = "K_phiH_normal")]
    KPhiHNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualityCase {
    pub pseudo_umbilical: bool,
    pub parallel_h: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub applicable: bool,
    pub failed_hypothesis: Option<String>,
    pub notes: Vec<String>,
    /// Minimum of `m f1 - f2 + 3 f3` over the grid (contact kinds).
    pub k_value: Option<f64>,
    /// Upper bound for `|H|^2`; infima are minima over grid samples.
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub bound: f64,
    /// `(m f1 - f2) / m`, what the `phi H` normal branch equation yields.
    pub bound_from_branch: Option<f64>,
    pub bound_is_grid_minimum: bool,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub measured_h_sq: f64,
    pub within_bound: bool,
    pub equality: bool,
    pub equality_case: Option<EqualityCase>,
}

/// Mean-curvature bound for CMC submanifolds of the given flag pattern.
pub fn bound_check(kind: BoundKind, samples: &[GridSample], tol: f64) -> BoundReport {
    let cmc = cmc_status(samples);
    let mut hyp = BTreeMap::new();
    let mut notes = Vec::new();
    let min_over = |f: &dyn Fn(&GridSample) -> f64| samples.iter().map(f).fold(f64::INFINITY, f64::min);
    let complex = |s: &GridSample| match s.coefficients {
        PointCoefficients::Complex { alpha, beta } => Some((alpha, beta)),
        PointCoefficients::Contact { .. } => None,
    };
    let m = samples.first().map_or(0, |s| s.m);
    let mf = m as f64;
    let (bound, k_value, bound_from_branch) = match kind {
        BoundKind::Lagrangian2a3b => {
            hyp.insert("complex_ambient".to_string(), all(samples, |s| complex(s).is_some()));
            hyp.insert("lagrangian_surface".to_string(), all(samples, |s| s.flags.is_lagrangian.holds()));
            (min_over(&|s| complex(s).map_or(f64::NAN, |(a, b)| (2.0 * a + 3.0 * b) / 2.0)), None, None)
        }
        BoundKind::Complex2a => {
            hyp.insert("complex_ambient".to_string(), all(samples, |s| complex(s).is_some()));
            hyp.insert("complex_surface".to_string(), all(samples, |s| s.m == 2 && s.flags.is_complex.holds()));
            (min_over(&|s| complex(s).map_or(f64::NAN, |(a, _)| a)), None, None)
        }
        BoundKind::KPhiHTangent | BoundKind::KPhiHNormal => {
            hyp.insert("contact_ambient".to_string(), all(samples, |s| s.k_value().is_some()));
            let tangent = all(samples, |s| s.flags.xi_tangent.holds());
            let waived = !tangent && xi_terms_vanish(samples);
            if waived {
                notes.push("xi_tangent waived: f2 = f3 = 0 on the grid".to_string());
            }
            hyp.insert("xi_tangent".to_string(), tangent || waived);
            let k = min_over(&|s| s.k_value().unwrap_or(f64::NAN));
            if kind == BoundKind::KPhiHTangent {
                hyp.insert("phi_h_tangent".to_string(), all(samples, |s| s.flags.phi_h_tangent.holds()));
                (k / mf, Some(k), None)
            } else {
                hyp.insert("phi_h_normal".to_string(), all(samples, |s| s.flags.phi_h_normal.holds()));
                let branch = min_over(&|s| match s.coefficients {
                    PointCoefficients::Contact { f1, f2, .. } => (mf * f1 - f2) / mf,
                    PointCoefficients::Complex { .. } => f64::NAN,
                });
                ((k - 3.0) / mf, Some(k), Some(branch))
            }
        }
    };
    hyp.insert("cmc".to_string(), cmc.is_cmc);
    hyp.insert("nonzero_h".to_string(), cmc.nonzero);
    let order = [
        "complex_ambient",
        "contact_ambient",
        "lagrangian_surface",
        "complex_surface",
        "xi_tangent",
        "phi_h_tangent",
        "phi_h_normal",
        "cmc",
        "nonzero_h",
    ];
    let failed = first_failed(&hyp, &order);
    let measured = cmc.max_h * cmc.max_h;
    let within = measured <= bound + tol;
    let equality = (measured - bound).abs() < tol;
    let equality_case = equality.then(|| EqualityCase {
        pseudo_umbilical: all(samples, |s| s.pseudo_umbilical_deviation.is_some_and(|d| d < tol)),
        parallel_h: all(samples, |s| s.nabla_h_norm < tol),
    });
    BoundReport {
        kind,
        applicable: failed.is_none(),
        failed_hypothesis: failed,
        notes,
        k_value,
        bound,
        bound_from_branch,
        bound_is_grid_minimum: true,
        measured_h_sq: measured,
        within_bound: within,
        equality,
        equality_case,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassThreshold {
    pub class: SpaceFormClass,
    pub c: f64,
    /// Non-existence holds for `c <= c_threshold`.
    pub c_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditVerdict {
    pub name: String,
    pub statement: String,
    /// The flag pattern of the statement holds at every sample.
    pub flags_hold: bool,
    /// Largest value of the controlling coefficient over the grid.
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub value: f64,
    pub threshold: f64,
    pub condition_holds: bool,
    pub applies: bool,
    pub class_threshold: Option<ClassThreshold>,
}

/// Which non-existence statements apply to this ambient and flag pattern. If
/// one applies, no CMC sample set may be proper biharmonic.
pub fn nonexistence_audit(space: &AmbientModel, samples: &[GridSample]) -> Vec<AuditVerdict> {
    let max_over = |f: &dyn Fn(&GridSample) -> f64| samples.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let m = samples.first().map_or(0, |s| s.m);
    let mut out = Vec::new();
    let mut push = |name: &str, statement: &str, flags_hold: bool, value: f64, threshold: f64, class: Option<ClassThreshold>| {
        let condition_holds = value <= threshold;
        out.push(AuditVerdict {
            name: name.into(),
            statement: statement.into(),
            flags_hold,
            value,
            threshold,
            condition_holds,
            applies: flags_hold && condition_holds,
            class_threshold: class,
        });
    };
    let coeff = |s: &GridSample| match s.coefficients {
        PointCoefficients::Complex { alpha, beta } => (alpha, beta),
        PointCoefficients::Contact { .. } => (f64::NAN, f64::NAN),
    };
    match space.kind {
        AmbientKind::GeneralizedComplex => {
            push(
                "cmc_hypersurface",
                "no proper biharmonic CMC hypersurface when alpha + beta <= 0",
                all(samples, |s| s.flags.is_hypersurface),
                max_over(&|s| coeff(s).0 + coeff(s).1),
                0.0,
                None,
            );
            push(
                "lagrangian_surface",
                "no proper biharmonic CMC Lagrangian surface when 2 alpha + 3 beta <= 0",
                all(samples, |s| s.flags.is_lagrangian.holds()),
                max_over(&|s| 2.0 * coeff(s).0 + 3.0 * coeff(s).1),
                0.0,
                None,
            );
            push(
                "complex_surface",
                "no proper biharmonic CMC complex surface when alpha <= 0",
                all(samples, |s| s.m == 2 && s.flags.is_complex.holds()),
                max_over(&|s| coeff(s).0),
                0.0,
                None,
            );
        }
        AmbientKind::GeneralizedSasakian => {
            let class = space.tag.and_then(SpaceFormClass::of_tag);
            let threshold = |k: f64| class.map(|(cl, c)| ClassThreshold { class: cl, c, c_threshold: cl.c_threshold(m, k) });
            let k = max_over(&|s| s.k_value().unwrap_or(f64::NAN));
            let xi_t = all(samples, |s| s.flags.xi_tangent.holds());
            push(
                "cmc_hypersurface_xi_tangent",
                "no proper biharmonic CMC hypersurface with xi tangent when m f1 - f2 + 3 f3 <= 0",
                xi_t && all(samples, |s| s.flags.is_hypersurface),
                k,
                0.0,
                threshold(0.0),
            );
            push(
                "xi_and_phi_h_tangent",
                "no proper biharmonic CMC submanifold with xi and phi H tangent when K(m, c) <= 0",
                xi_t && all(samples, |s| s.flags.phi_h_tangent.holds()),
                k,
                0.0,
                threshold(0.0),
            );
            push(
                "xi_tangent_phi_h_normal",
                "no proper biharmonic CMC submanifold with xi tangent and phi H normal when K(m, c) <= 3",
                xi_t && all(samples, |s| s.flags.phi_h_normal.holds()),
                k,
                3.0,
                threshold(3.0),
            );
        }
    }
    out
}
