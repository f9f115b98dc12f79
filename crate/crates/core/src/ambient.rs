//! Ambient space-form models.
//!
//! An [`AmbientModel`] is either a coordinate chart with a closed-form metric
//! or a submanifold of Euclidean space described by unit normal fields. Both
//! carry an almost Hermitian or almost contact structure and the coefficient
//! functions of their algebraic curvature tensor.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{evaluate_jet, parse_expression, Bindings, EvalError, Expr, ParseError};
use crate::jet::{Jet, Monomials};
use crate::jetla::{self, JetMat, JetVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AmbientKind {
    GeneralizedComplex,
    GeneralizedSasakian,
}

/// Classical space form generating the curvature coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ClassicalTag {
    Sasaki(f64),
    Kenmotsu(f64),
    Cosymplectic(f64),
    ComplexSpaceForm(f64),
}

impl ClassicalTag {
    /// `(f1, f2, f3)` for the contact tags.
    pub fn contact_coefficients(self) -> Option<[f64; 3]> {
        match self {
            ClassicalTag::Sasaki(c) => Some([(c + 3.0) / 4.0, (c - 1.0) / 4.0, (c - 1.0) / 4.0]),
            ClassicalTag::Kenmotsu(c) => Some([(c - 3.0) / 4.0, (c + 1.0) / 4.0, (c + 1.0) / 4.0]),
            ClassicalTag::Cosymplectic(c) => Some([c / 4.0; 3]),
            ClassicalTag::ComplexSpaceForm(_) => None,
        }
    }

    /// `(alpha, beta)` for a complex space form of holomorphic curvature `4 rho`.
    pub fn complex_coefficients(self) -> Option<[f64; 2]> {
        match self {
            ClassicalTag::ComplexSpaceForm(rho) => Some([rho, rho]),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum AmbientError {
    #[error("evaluating {context}: {source}")]
    Eval { context: String, source: EvalError },
    #[error("parsing {context}: {source}")]
    Parse { context: String, source: ParseError },
    #[error("degenerate metric at {0:?}")]
    DegenerateMetric(Vec<f64>),
    #[error("invalid ambient model: {0}")]
    Invalid(String),
    #[error("unknown ambient catalog entry '{0}'")]
    UnknownCatalog(String),
}

#[derive(Debug, Clone)]
pub enum Backend {
    /// Closed-form metric in the model's coordinates.
    Chart { metric: Vec<Vec<Expr>> },
    /// Submanifold of Euclidean space. `normals` are orthonormal unit normal
    /// fields and `constraints` vanish on the submanifold, both written in
    /// the Euclidean coordinates. `chart` parametrizes the submanifold from
    /// `dim` parameters `p1..`, used for pulled-back metric jets.
    Embedded { normals: Vec<Vec<Expr>>, constraints: Vec<Expr>, chart: Vec<Expr> },
}

#[derive(Debug, Clone)]
pub enum StructureExprs {
    /// `(J v)^a = j[a][b] v^b`.
    Complex { j: Vec<Vec<Expr>> },
    Contact { phi: Vec<Vec<Expr>>, xi: Vec<Expr>, eta: Vec<Expr> },
}

#[derive(Debug, Clone)]
pub enum CoefficientExprs {
    Complex { alpha: Expr, beta: Expr },
    Contact { f1: Expr, f2: Expr, f3: Expr },
}

#[derive(Debug, Clone)]
pub struct AmbientModel {
    pub name: String,
    pub kind: AmbientKind,
    /// Intrinsic dimension of the ambient manifold.
    pub dim: usize,
    /// Names of the coordinates points and vectors are written in (chart
    /// coordinates, or Euclidean coordinates for an embedded model).
    pub coords: Vec<String>,
    pub backend: Backend,
    pub structure: StructureExprs,
    pub coefficients: CoefficientExprs,
    pub tag: Option<ClassicalTag>,
    /// Whether the algebraic curvature is known to be the Levi-Civita curvature.
    pub certified: bool,
    pub bindings: Bindings,
}

/// Structure tensors evaluated at a point.
#[derive(Debug, Clone)]
pub enum PointStructure {
    Complex { j: DMatrix<f64> },
    Contact { phi: DMatrix<f64>, xi: DVector<f64>, eta: DVector<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PointCoefficients {
    Complex { alpha: f64, beta: f64 },
    Contact { f1: f64, f2: f64, f3: f64 },
}

/// Everything algebraic about the ambient space at one point.
#[derive(Debug, Clone)]
pub struct AmbientState {
    pub point: DVector<f64>,
    pub metric: DMatrix<f64>,
    /// Orthogonal projector onto the tangent space (identity for charts).
    pub projector: DMatrix<f64>,
    pub structure: PointStructure,
    pub coefficients: PointCoefficients,
}

#[derive(Debug, Clone)]
enum Connection {
    Christoffel(Vec<JetMat>),
    Projector(JetMat),
}

/// Metric and connection of the ambient space along a map given by jets.
#[derive(Debug, Clone)]
pub struct AlongField {
    pub metric: JetMat,
    connection: Connection,
}

/// Riemann tensor `R^a_{bcd}` with `R(e_c, e_d) e_b = R^a_{bcd} e_a`.
#[derive(Debug, Clone)]
pub struct Riemann {
    n: usize,
    data: Vec<f64>,
}

impl Riemann {
    /// From Christoffel jets of order at least one, at their base point:
    /// `R^a_{bcd} = d_c G^a_{db} - d_d G^a_{cb} + G^a_{ce} G^e_{db} - G^a_{de} G^e_{cb}`.
    pub fn from_christoffel(gamma: &[JetMat]) -> Riemann {
        let n = gamma.len();
        let g0 = |a: usize, b: usize, c: usize| gamma[a][b][c].value();
        let dg = |a: usize, b: usize, c: usize, d: usize| gamma[a][b][c].d1(d);
        let mut data = vec![0.0; n * n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut r = dg(a, d, b, c) - dg(a, c, b, d);
                        for e in 0..n {
                            r += g0(a, c, e) * g0(e, d, b) - g0(a, d, e) * g0(e, c, b);
                        }
                        data[((a * n + b) * n + c) * n + d] = r;
                    }
                }
            }
        }
        Riemann { n, data }
    }

    /// Scalar curvature `g^{bd} R^c_{dcb}` for the metric values `ginv^{-1}`.
    pub fn scalar(&self, ginv: &DMatrix<f64>) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for b in 0..n {
            for d in 0..n {
                for c in 0..n {
                    s += ginv[(b, d)] * self.get(c, d, c, b);
                }
            }
        }
        s
    }

    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.n;
        self.data[((a * n + b) * n + c) * n + d]
    }

    /// `R(x, y) z`.
    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |a, _| {
            let mut s = 0.0;
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        s += self.get(a, b, c, d) * z[b] * x[c] * y[d];
                    }
                }
            }
            s
        })
    }
}

/// Maximum residual per checked identity.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct StructureReport {
    pub residuals: BTreeMap<String, f64>,
}

impl StructureReport {
    fn record(&mut self, name: &str, value: f64) {
        let e = self.residuals.entry(name.to_string()).or_insert(0.0);
        if value > *e || value.is_nan() {
            *e = value;
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.values().fold(0.0, |a, &b| a.max(b))
    }
}

fn eval_err(context: impl Into<String>) -> impl FnOnce(EvalError) -> AmbientError {
    let context = context.into();
    move |source| AmbientError::Eval { context, source }
}

fn jet_of(e: &Expr, x: &[Jet], b: &Bindings, context: &str) -> Result<Jet, AmbientError> {
    let (nvars, order) = (x[0].nvars(), x[0].order());
    e.eval_jets(x, nvars, order, b).map_err(eval_err(context))
}

fn value_of(e: &Expr, x: &[f64], b: &Bindings, context: &str) -> Result<f64, AmbientError> {
    e.eval(x, b).map_err(eval_err(context))
}

/// Gram-Schmidt in the inner product `g`, picking at each step the candidate
/// with the largest remaining norm (lowest index on ties). Returns at most
/// `count` vectors; stops early if every remaining norm is below `tol`.
pub fn orthonormalize(
    seed: &[DVector<f64>],
    candidates: &[DVector<f64>],
    g: &DMatrix<f64>,
    count: usize,
    tol: f64,
) -> Vec<DVector<f64>> {
    let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * g * b)[(0, 0)];
    let mut basis: Vec<DVector<f64>> = seed.to_vec();
    let mut remaining: Vec<DVector<f64>> = candidates.to_vec();
    let mut out = Vec::new();
    while out.len() < count {
        for r in remaining.iter_mut() {
            for e in &basis {
                let c = ip(e, r);
                *r -= e * c;
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in remaining.iter().enumerate() {
            let n = ip(r, r).max(0.0).sqrt();
            if best.is_none_or(|(_, bn)| n > bn) {
                best = Some((i, n));
            }
        }
        match best {
            Some((i, n)) if n > tol => {
                let mut v = remaining.remove(i) / n;
                // second pass for stability
                for e in &basis {
                    let c = ip(e, &v);
                    v -= e * c;
                }
                let n2 = ip(&v, &v).sqrt();
                v /= n2;
                basis.push(v.clone());
                out.push(v);
            }
            _ => break,
        }
    }
    out
}

impl AmbientState {
    pub fn ncoords(&self) -> usize {
        self.point.len()
    }

    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a.transpose() * &self.metric * b)[(0, 0)]
    }

    pub fn norm(&self, a: &DVector<f64>) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    /// `J v` or `phi v`.
    pub fn apply_structure(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.structure {
            PointStructure::Complex { j } => j * v,
            PointStructure::Contact { phi, .. } => phi * v,
        }
    }

    pub fn xi(&self) -> Option<&DVector<f64>> {
        match &self.structure {
            PointStructure::Contact { xi, .. } => Some(xi),
            PointStructure::Complex { .. } => None,
        }
    }

    pub fn eta(&self, v: &DVector<f64>) -> f64 {
        match &self.structure {
            PointStructure::Contact { eta, .. } => eta.dot(v),
            PointStructure::Complex { .. } => 0.0,
        }
    }

    /// Orthonormal basis of the tangent space.
    pub fn tangent_basis(&self) -> Vec<DVector<f64>> {
        let n = self.ncoords();
        let cols: Vec<DVector<f64>> = (0..n).map(|i| self.projector.column(i).into_owned()).collect();
        orthonormalize(&[], &cols, &self.metric, n, 1e-10)
    }

    /// `R1(x, y) z = g(y, z) x - g(x, z) y`.
    pub fn r1(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        x * self.inner(y, z) - y * self.inner(x, z)
    }

    /// `R2(x, y) z = g(Jy, z) Jx - g(Jx, z) Jy + 2 g(Jy, x) Jz`.
    pub fn r2(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let (jx, jy, jz) = (self.apply_structure(x), self.apply_structure(y), self.apply_structure(z));
        &jx * self.inner(&jy, z) - &jy * self.inner(&jx, z) + jz * (2.0 * self.inner(&jy, x))
    }

    pub fn r1_star(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        self.r1(x, y, z)
    }

    /// `eta(x)eta(z) y - eta(y)eta(z) x + g(x,z)eta(y) xi - g(y,z)eta(x) xi`.
    pub fn r2_star(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let xi = self.xi().expect("contact structure");
        let (ex, ey, ez) = (self.eta(x), self.eta(y), self.eta(z));
        y * (ex * ez) - x * (ey * ez) + xi * (self.inner(x, z) * ey - self.inner(y, z) * ex)
    }

    /// `Omega(z,y) phi x - Omega(z,x) phi y + 2 Omega(x,y) phi z` with
    /// `Omega(a,b) = g(a, phi b)`.
    pub fn r3_star(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let (px, py, pz) = (self.apply_structure(x), self.apply_structure(y), self.apply_structure(z));
        let omega = |a: &DVector<f64>, pb: &DVector<f64>| self.inner(a, pb);
        &px * omega(z, &py) - &py * omega(z, &px) + pz * (2.0 * omega(x, &py))
    }

    /// The algebraic curvature tensor of the space form.
    pub fn curvature(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        match self.coefficients {
            PointCoefficients::Complex { alpha, beta } => self.r1(x, y, z) * alpha + self.r2(x, y, z) * beta,
            PointCoefficients::Contact { f1, f2, f3 } => {
                self.r1_star(x, y, z) * f1 + self.r2_star(x, y, z) * f2 + self.r3_star(x, y, z) * f3
            }
        }
    }
}

impl AlongField {
    pub fn inner(&self, a: &[Jet], b: &[Jet]) -> Jet {
        jetla::inner(&self.metric, a, b)
    }

    /// Ambient covariant derivative of the field `v` along the map, in the
    /// direction of parameter `var`; `tangent` is the derivative of the map
    /// in that direction.
    pub fn covariant(&self, var: usize, tangent: &[Jet], v: &[Jet]) -> JetVec {
        let dv = jetla::derivative(v, var);
        match &self.connection {
            Connection::Christoffel(gamma) => {
                let n = v.len();
                (0..n)
                    .map(|k| {
                        let mut acc = dv[k].clone();
                        for i in 0..n {
                            let ti = &tangent[i];
                            let mut inner = &gamma[k][i][0] * &v[0];
                            for j in 1..n {
                                inner = &inner + &(&gamma[k][i][j] * &v[j]);
                            }
                            acc = &acc + &(ti * &inner);
                        }
                        acc
                    })
                    .collect()
            }
            Connection::Projector(p) => jetla::mat_vec(p, &dv),
        }
    }

    /// Projects onto the ambient tangent space (identity for charts).
    pub fn tangent_part(&self, v: &[Jet]) -> JetVec {
        match &self.connection {
            Connection::Christoffel(_) => v.to_vec(),
            Connection::Projector(p) => jetla::mat_vec(p, v),
        }
    }
}

fn parse_with(src: &str, params: &[&str], context: &str) -> Result<Expr, AmbientError> {
    parse_expression(src, params).map_err(|source| AmbientError::Parse { context: context.to_string(), source })
}

impl AmbientModel {
    pub fn ncoords(&self) -> usize {
        self.coords.len()
    }

    pub fn is_embedded(&self) -> bool {
        matches!(self.backend, Backend::Embedded { .. })
    }

    /// Checks dimensions and that kind, structure and coefficients agree.
    pub fn validate(&self) -> Result<(), AmbientError> {
        let n = self.ncoords();
        let bad = |m: String| Err(AmbientError::Invalid(m));
        match self.kind {
            AmbientKind::GeneralizedComplex => {
                if self.dim != 4 {
                    return bad(format!("generalized complex space forms are 4-dimensional, got {}", self.dim));
                }
                if !matches!(self.structure, StructureExprs::Complex { .. })
                    || !matches!(self.coefficients, CoefficientExprs::Complex { .. })
                {
                    return bad("complex kind needs J and (alpha, beta)".into());
                }
            }
            AmbientKind::GeneralizedSasakian => {
                if self.dim % 2 == 0 || self.dim < 3 {
                    return bad(format!("contact ambient dimension must be odd and >= 3, got {}", self.dim));
                }
                if !matches!(self.structure, StructureExprs::Contact { .. })
                    || !matches!(self.coefficients, CoefficientExprs::Contact { .. })
                {
                    return bad("contact kind needs (phi, xi, eta) and (f1, f2, f3)".into());
                }
            }
        }
        let square = |m: &Vec<Vec<Expr>>| m.len() == n && m.iter().all(|r| r.len() == n);
        match &self.backend {
            Backend::Chart { metric } => {
                if n != self.dim || !square(metric) {
                    return bad(format!("chart metric must be {}x{}", self.dim, self.dim));
                }
            }
            Backend::Embedded { normals, chart, .. } => {
                if n != self.dim + normals.len() || normals.iter().any(|v| v.len() != n) || chart.len() != n {
                    return bad("embedded model dimensions are inconsistent".into());
                }
            }
        }
        match &self.structure {
            StructureExprs::Complex { j } if !square(j) => bad("J must be square in the coordinates".into()),
            StructureExprs::Contact { phi, xi, eta } if !square(phi) || xi.len() != n || eta.len() != n => {
                bad("phi, xi, eta sizes do not match the coordinates".into())
            }
            _ => Ok(()),
        }
    }

    /// Euclidean point of an embedded model from chart parameters; the
    /// identity for charts.
    pub fn chart_point(&self, p: &[f64]) -> Result<DVector<f64>, AmbientError> {
        match &self.backend {
            Backend::Chart { .. } => Ok(DVector::from_column_slice(p)),
            Backend::Embedded { chart, .. } => {
                let v: Result<Vec<f64>, _> =
                    chart.iter().map(|e| value_of(e, p, &self.bindings, "ambient chart")).collect();
                Ok(DVector::from_vec(v?))
            }
        }
    }

    /// Largest constraint violation at a point (0 for charts).
    pub fn constraint_violation(&self, x: &[f64]) -> Result<f64, AmbientError> {
        match &self.backend {
            Backend::Chart { .. } => Ok(0.0),
            Backend::Embedded { constraints, .. } => constraints.iter().try_fold(0.0f64, |m, c| {
                Ok(m.max(value_of(c, x, &self.bindings, "ambient constraint")?.abs()))
            }),
        }
    }

    /// Metric component jets. For an embedded model `x` is a chart parameter
    /// point and the metric is pulled back through the chart.
    pub fn metric_jet(&self, x: &[f64], order: usize) -> Result<JetMat, AmbientError> {
        let g = match &self.backend {
            Backend::Chart { metric } => {
                let vars = Jet::variables(x, order);
                metric
                    .iter()
                    .map(|row| row.iter().map(|e| jet_of(e, &vars, &self.bindings, "metric")).collect())
                    .collect::<Result<JetMat, _>>()?
            }
            Backend::Embedded { chart, .. } => {
                let f: JetVec = chart
                    .iter()
                    .map(|e| evaluate_jet(e, x, order + 1, &self.bindings).map_err(eval_err("ambient chart")))
                    .collect::<Result<_, _>>()?;
                let tangents: Vec<JetVec> = (0..x.len()).map(|a| jetla::derivative(&f, a)).collect();
                let (nv, ord) = (x.len(), order);
                (0..x.len())
                    .map(|a| {
                        (0..x.len())
                            .map(|b| {
                                let terms: Vec<Jet> =
                                    tangents[a].iter().zip(&tangents[b]).map(|(u, v)| u * v).collect();
                                jetla::sum(nv, ord, &terms)
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        let values = jetla::mat_values(&g);
        let symmetric = (&values - values.transpose()).amax() <= 1e-12 * (1.0 + values.amax());
        if !symmetric || values.cholesky().is_none() {
            return Err(AmbientError::DegenerateMetric(x.to_vec()));
        }
        Ok(g)
    }

    /// Christoffel symbols `gamma[k][i][j]` of the chart metric (or of the
    /// pulled-back metric for an embedded model).
    pub fn christoffel_jet(&self, x: &[f64], order: usize) -> Result<Vec<JetMat>, AmbientError> {
        let g = self.metric_jet(x, order + 1)?;
        jetla::christoffel_symbols(&g).ok_or_else(|| AmbientError::DegenerateMetric(x.to_vec()))
    }

    /// Riemann tensor recomputed from Christoffel jets (chart coordinates, or
    /// chart parameters for an embedded model).
    pub fn riemann_from_christoffel(&self, x: &[f64]) -> Result<Riemann, AmbientError> {
        Ok(Riemann::from_christoffel(&self.christoffel_jet(x, 1)?))
    }

    /// Lowered curvature `R(e_c, e_d, e_b, e_a) = <R(e_c,e_d)e_b, e_a>` in
    /// chart parameters of an embedded model, from the Gauss equation of the
    /// Euclidean embedding. Indexed `[a][b][c][d]`.
    pub fn gauss_riemann(&self, p: &[f64]) -> Result<Vec<f64>, AmbientError> {
        let Backend::Embedded { normals, chart, .. } = &self.backend else {
            return Err(AmbientError::Invalid("Gauss curvature needs an embedded model".into()));
        };
        let n = p.len();
        let f: JetVec = chart
            .iter()
            .map(|e| evaluate_jet(e, p, 2, &self.bindings).map_err(eval_err("ambient chart")))
            .collect::<Result<_, _>>()?;
        let x: Vec<f64> = f.iter().map(Jet::value).collect();
        let nv: Vec<DVector<f64>> = normals
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| value_of(e, &x, &self.bindings, "ambient normal"))
                    .collect::<Result<Vec<_>, _>>()
                    .map(DVector::from_vec)
            })
            .collect::<Result<_, _>>()?;
        let second = |a: usize, b: usize| {
            let mut counts = vec![0u8; n];
            counts[a] += 1;
            counts[b] += 1;
            let v = DVector::from_iterator(f.len(), f.iter().map(|j| j.partial(&counts)));
            nv.iter().map(|nu| nu.dot(&v)).collect::<Vec<f64>>()
        };
        let bform: Vec<Vec<Vec<f64>>> = (0..n).map(|a| (0..n).map(|b| second(a, b)).collect()).collect();
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let mut out = vec![0.0; n * n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        // <R(X,Y)Z,W> = <B(X,W),B(Y,Z)> - <B(X,Z),B(Y,W)>
                        out[((a * n + b) * n + c) * n + d] =
                            dot(&bform[c][a], &bform[d][b]) - dot(&bform[c][b], &bform[d][a]);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Derivatives of the chart of an embedded model (columns), or the
    /// identity for a chart model.
    pub fn chart_differential(&self, p: &[f64]) -> Result<DMatrix<f64>, AmbientError> {
        match &self.backend {
            Backend::Chart { .. } => Ok(DMatrix::identity(p.len(), p.len())),
            Backend::Embedded { chart, .. } => {
                let rows: Vec<Jet> = chart
                    .iter()
                    .map(|e| evaluate_jet(e, p, 1, &self.bindings).map_err(eval_err("ambient chart")))
                    .collect::<Result<_, _>>()?;
                Ok(DMatrix::from_fn(rows.len(), p.len(), |i, a| rows[i].d1(a)))
            }
        }
    }

    fn structure_jets(&self, x: &[Jet]) -> Result<StructureJets, AmbientError> {
        let b = &self.bindings;
        let mat = |m: &Vec<Vec<Expr>>, what: &str| -> Result<JetMat, AmbientError> {
            m.iter().map(|row| row.iter().map(|e| jet_of(e, x, b, what)).collect()).collect()
        };
        let vec = |v: &Vec<Expr>, what: &str| -> Result<JetVec, AmbientError> {
            v.iter().map(|e| jet_of(e, x, b, what)).collect()
        };
        Ok(match &self.structure {
            StructureExprs::Complex { j } => StructureJets::Complex { j: mat(j, "J")? },
            StructureExprs::Contact { phi, xi, eta } => {
                StructureJets::Contact { phi: mat(phi, "phi")?, xi: vec(xi, "xi")?, eta: vec(eta, "eta")? }
            }
        })
    }

    /// Structure, metric and coefficients at a point of the model's coordinates.
    pub fn state(&self, x: &[f64]) -> Result<AmbientState, AmbientError> {
        if x.len() != self.ncoords() {
            return Err(AmbientError::Invalid(format!("point has {} coordinates, expected {}", x.len(), self.ncoords())));
        }
        let vars = Jet::variables(x, 0);
        let b = &self.bindings;
        let n = x.len();
        let (metric, projector) = match &self.backend {
            Backend::Chart { metric } => {
                let g = DMatrix::from_fn(n, n, |i, j| value_of(&metric[i][j], x, b, "metric").unwrap_or(f64::NAN));
                if g.iter().any(|v| !v.is_finite()) || g.clone().cholesky().is_none() {
                    return Err(AmbientError::DegenerateMetric(x.to_vec()));
                }
                (g, DMatrix::identity(n, n))
            }
            Backend::Embedded { normals, .. } => {
                let mut p = DMatrix::identity(n, n);
                for row in normals {
                    let nu = DVector::from_vec(
                        row.iter().map(|e| value_of(e, x, b, "ambient normal")).collect::<Result<Vec<_>, _>>()?,
                    );
                    p -= &nu * nu.transpose();
                }
                (DMatrix::identity(n, n), p)
            }
        };
        let structure = match self.structure_jets(&vars)? {
            StructureJets::Complex { j } => PointStructure::Complex { j: jetla::mat_values(&j) },
            StructureJets::Contact { phi, xi, eta } => PointStructure::Contact {
                phi: jetla::mat_values(&phi),
                xi: jetla::values(&xi),
                eta: jetla::values(&eta),
            },
        };
        let coefficients = match &self.coefficients {
            CoefficientExprs::Complex { alpha, beta } => PointCoefficients::Complex {
                alpha: value_of(alpha, x, b, "alpha")?,
                beta: value_of(beta, x, b, "beta")?,
            },
            CoefficientExprs::Contact { f1, f2, f3 } => PointCoefficients::Contact {
                f1: value_of(f1, x, b, "f1")?,
                f2: value_of(f2, x, b, "f2")?,
                f3: value_of(f3, x, b, "f3")?,
            },
        };
        Ok(AmbientState { point: DVector::from_column_slice(x), metric, projector, structure, coefficients })
    }

    /// Metric and connection along a map `x(u)` given by jets. The result
    /// has the order of `x`.
    pub fn along(&self, x: &[Jet]) -> Result<AlongField, AmbientError> {
        let order = x[0].order();
        let b = &self.bindings;
        match &self.backend {
            Backend::Chart { metric } => {
                let g: JetMat = metric
                    .iter()
                    .map(|row| row.iter().map(|e| jet_of(e, x, b, "metric")).collect())
                    .collect::<Result<_, _>>()?;
                let x0: Vec<f64> = x.iter().map(Jet::value).collect();
                let gamma = self.christoffel_jet(&x0, order)?;
                let mono = Monomials::new(x, order);
                let n = x.len();
                let mut along: Vec<JetMat> = vec![vec![Vec::with_capacity(n); n]; n];
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            let v = if j < i { along[k][j][i].clone() } else { mono.apply(&gamma[k][i][j]) };
                            along[k][i].push(v);
                        }
                    }
                }
                Ok(AlongField { metric: g, connection: Connection::Christoffel(along) })
            }
            Backend::Embedded { normals, .. } => {
                let n = x.len();
                let (nvars, _) = (x[0].nvars(), order);
                let mut p = jetla::constant_mat(&DMatrix::identity(n, n), nvars, order);
                for row in normals {
                    let nu: JetVec =
                        row.iter().map(|e| jet_of(e, x, b, "ambient normal")).collect::<Result<_, _>>()?;
                    for i in 0..n {
                        for j in 0..n {
                            p[i][j] = &p[i][j] - &(&nu[i] * &nu[j]);
                        }
                    }
                }
                let g = jetla::constant_mat(&DMatrix::identity(n, n), nvars, order);
                Ok(AlongField { metric: g, connection: Connection::Projector(p) })
            }
        }
    }

    /// Algebraic invariants of the structure and, with a classical tag, the
    /// covariant-derivative identities of its class, at each sample point.
    pub fn verify_structure(&self, samples: &[Vec<f64>]) -> Result<StructureReport, AmbientError> {
        let mut report = StructureReport::default();
        for x in samples {
            let st = self.state(x)?;
            let basis = st.tangent_basis();
            let metric_asym = (&st.metric - st.metric.transpose()).amax();
            report.record("metric_symmetry", metric_asym);
            match &st.structure {
                PointStructure::Complex { .. } => {
                    for xv in &basis {
                        let jjx = st.apply_structure(&st.apply_structure(xv));
                        report.record("J2_plus_id", st.norm(&(jjx + xv)));
                        for yv in &basis {
                            let d = st.inner(&st.apply_structure(xv), &st.apply_structure(yv)) - st.inner(xv, yv);
                            report.record("J_isometry", d.abs());
                        }
                    }
                }
                PointStructure::Contact { xi, .. } => {
                    report.record("eta_xi_minus_one", (st.eta(xi) - 1.0).abs());
                    for xv in &basis {
                        let ppx = st.apply_structure(&st.apply_structure(xv));
                        let rhs = -xv + xi * st.eta(xv);
                        report.record("phi2_identity", st.norm(&(ppx - rhs)));
                        report.record("eta_is_g_xi", (st.eta(xv) - st.inner(xv, xi)).abs());
                        for yv in &basis {
                            let d = st.inner(&st.apply_structure(xv), &st.apply_structure(yv)) - st.inner(xv, yv)
                                + st.eta(xv) * st.eta(yv);
                            report.record("phi_compatibility", d.abs());
                        }
                    }
                }
            }
            if let Some(tag) = self.tag {
                self.record_parallel_identities(tag, x, &st, &basis, &mut report)?;
            }
        }
        Ok(report)
    }

    fn record_parallel_identities(
        &self,
        tag: ClassicalTag,
        x: &[f64],
        st: &AmbientState,
        basis: &[DVector<f64>],
        report: &mut StructureReport,
    ) -> Result<(), AmbientError> {
        let n = x.len();
        let vars = Jet::variables(x, 1);
        let field = self.along(&vars)?;
        let structure = self.structure_jets(&vars)?;
        let (tensor, xi) = match &structure {
            StructureJets::Complex { j } => (j, None),
            StructureJets::Contact { phi, xi, .. } => (phi, Some(xi)),
        };
        let unit = |a: usize| -> JetVec {
            (0..n).map(|i| Jet::constant(n, 1, if i == a { 1.0 } else { 0.0 })).collect()
        };
        // directional covariant derivative of a jet field at the point
        let nabla = |dir: &DVector<f64>, v: &JetVec| -> DVector<f64> {
            let mut out = DVector::zeros(n);
            for a in 0..n {
                if dir[a] != 0.0 {
                    out += jetla::values(&field.covariant(a, &unit(a), v)) * dir[a];
                }
            }
            out
        };
        for xv in basis {
            for yv in basis {
                let y_field = field.tangent_part(&jetla::constant_vec(yv, n, 1));
                let t_y = jetla::mat_vec(tensor, &y_field);
                let nabla_t = nabla(xv, &t_y) - st.apply_structure(&nabla(xv, &y_field));
                let expected = match tag {
                    ClassicalTag::Sasaki(_) => {
                        st.xi().unwrap() * st.inner(xv, yv) - xv * st.eta(yv)
                    }
                    ClassicalTag::Kenmotsu(_) => {
                        -st.apply_structure(xv) * st.eta(yv)
                            - st.xi().unwrap() * st.inner(xv, &st.apply_structure(yv))
                    }
                    ClassicalTag::Cosymplectic(_) | ClassicalTag::ComplexSpaceForm(_) => DVector::zeros(n),
                };
                report.record("nabla_structure", st.norm(&(nabla_t - expected)));
            }
            if let Some(xi) = xi {
                let nabla_xi = nabla(xv, xi);
                let expected = match tag {
                    ClassicalTag::Sasaki(_) => -st.apply_structure(xv),
                    ClassicalTag::Kenmotsu(_) => xv - st.xi().unwrap() * st.eta(xv),
                    _ => DVector::zeros(n),
                };
                report.record("nabla_xi", st.norm(&(nabla_xi - expected)));
            }
        }
        Ok(())
    }
}

enum StructureJets {
    Complex { j: JetMat },
    Contact { phi: JetMat, xi: JetVec, eta: JetVec },
}

/// `R(x, y) z` with the model's algebraic curvature at point `p`.
pub fn curvature_apply(
    space: &AmbientModel,
    p: &[f64],
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<DVector<f64>, AmbientError> {
    Ok(space.state(p)?.curvature(x, y, z))
}

/// A catalog entry: name, parameters with defaults, one-line summary.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: Vec<(&'static str, f64)>,
    pub summary: &'static str,
}

pub fn catalog_entries() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry { name: "flat_C2", params: vec![], summary: "flat C^2, alpha = beta = 0" },
        CatalogEntry {
            name: "CP2",
            params: vec![("rho", 1.0)],
            summary: "complex projective plane of holomorphic curvature 4 rho, affine chart",
        },
        CatalogEntry {
            name: "synthetic_N",
            params: vec![("alpha", 1.0), ("beta", 2.0)],
            summary: "flat R^4 carrying algebraic curvature alpha R1 + beta R2 (not certified)",
        },
        CatalogEntry { name: "sasakian_R5", params: vec![], summary: "standard Sasakian R^5, c = -3" },
        CatalogEntry { name: "sasakian_sphere_S5", params: vec![], summary: "unit sphere S^5 in C^3, c = 1" },
        CatalogEntry { name: "kenmotsu_H5", params: vec![], summary: "warped product R x_{e^t} C^2, c = -1" },
        CatalogEntry { name: "cosymplectic_R5", params: vec![], summary: "flat R x C^2, c = 0" },
    ]
}

fn exprs(srcs: &[String], params: &[&str], context: &str) -> Result<Vec<Expr>, AmbientError> {
    srcs.iter().map(|s| parse_with(s, params, context)).collect()
}

fn expr_matrix(srcs: &[Vec<String>], params: &[&str], context: &str) -> Result<Vec<Vec<Expr>>, AmbientError> {
    srcs.iter().map(|r| exprs(r, params, context)).collect()
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn constant_matrix(m: &DMatrix<f64>) -> Vec<Vec<String>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| num(m[(i, j)])).collect()).collect()
}

/// Standard complex structure on coordinates ordered `(x1, y1, x2, y2, ...)`:
/// `J d/dx_k = d/dy_k`.
fn interleaved_j(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(n, n);
    for k in 0..n / 2 {
        j[(2 * k + 1, 2 * k)] = 1.0;
        j[(2 * k, 2 * k + 1)] = -1.0;
    }
    j
}

/// Contact-type `phi` on `(x1, x2, y1, y2, t)` with `phi d/dx_i = d/dy_i`.
fn product_phi() -> DMatrix<f64> {
    let mut phi = DMatrix::zeros(5, 5);
    for i in 0..2 {
        phi[(2 + i, i)] = 1.0;
        phi[(i, 2 + i)] = -1.0;
    }
    phi
}

fn param(params: &BTreeMap<String, f64>, name: &str, default: f64) -> f64 {
    params.get(name).copied().unwrap_or(default)
}

/// Builds a catalog ambient model.
pub fn catalog(name: &str, params: &BTreeMap<String, f64>) -> Result<AmbientModel, AmbientError> {
    let entry = catalog_entries()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| AmbientError::UnknownCatalog(name.to_string()))?;
    for key in params.keys() {
        if !entry.params.iter().any(|(p, _)| p == key) {
            return Err(AmbientError::Invalid(format!("ambient '{name}' has no parameter '{key}'")));
        }
    }
    let mut bindings = Bindings::new();
    for (p, default) in &entry.params {
        bindings.set(p, param(params, p, *default));
    }
    let model = match name {
        "flat_C2" | "synthetic_N" | "CP2" => complex_model(name, bindings)?,
        "sasakian_R5" => sasakian_r5(bindings)?,
        "sasakian_sphere_S5" => sasakian_sphere(bindings)?,
        "kenmotsu_H5" | "cosymplectic_R5" => product_contact(name, bindings)?,
        _ => unreachable!("catalog entry without builder"),
    };
    model.validate()?;
    Ok(model)
}

fn complex_model(name: &str, bindings: Bindings) -> Result<AmbientModel, AmbientError> {
    let coords = ["x1", "y1", "x2", "y2"];
    let identity: Vec<Vec<String>> =
        (0..4).map(|i| (0..4).map(|j| if i == j { "1" } else { "0" }.to_string()).collect()).collect();
    let (metric, alpha, beta, tag, certified) = match name {
        "flat_C2" => (identity, "0", "0", Some(ClassicalTag::ComplexSpaceForm(0.0)), true),
        "synthetic_N" => (identity, "alpha", "beta", None, false),
        _ => {
            let rho = bindings.get("rho").unwrap_or(1.0);
            let a = ["x1", "y1", "x2", "y2"];
            let b = ["(-y1)", "x1", "(-y2)", "x2"];
            let denom = "(1 + rho*(x1^2 + y1^2 + x2^2 + y2^2))";
            let m = (0..4)
                .map(|i| {
                    (0..4)
                        .map(|j| {
                            let diag = if i == j { denom } else { "0" };
                            format!("({diag} - rho*({}*{} + {}*{})) / {denom}^2", a[i], a[j], b[i], b[j])
                        })
                        .collect()
                })
                .collect();
            (m, "rho", "rho", Some(ClassicalTag::ComplexSpaceForm(rho)), true)
        }
    };
    Ok(AmbientModel {
        name: name.to_string(),
        kind: AmbientKind::GeneralizedComplex,
        dim: 4,
        coords: coords.iter().map(|s| s.to_string()).collect(),
        backend: Backend::Chart { metric: expr_matrix(&metric, &coords, "metric")? },
        structure: StructureExprs::Complex { j: expr_matrix(&constant_matrix(&interleaved_j(4)), &coords, "J")? },
        coefficients: CoefficientExprs::Complex {
            alpha: parse_with(alpha, &coords, "alpha")?,
            beta: parse_with(beta, &coords, "beta")?,
        },
        tag,
        certified,
        bindings,
    })
}

fn contact_coefficients(tag: ClassicalTag, coords: &[&str]) -> Result<CoefficientExprs, AmbientError> {
    let [f1, f2, f3] = tag.contact_coefficients().expect("contact tag");
    Ok(CoefficientExprs::Contact {
        f1: parse_with(&num(f1), coords, "f1")?,
        f2: parse_with(&num(f2), coords, "f2")?,
        f3: parse_with(&num(f3), coords, "f3")?,
    })
}

fn sasakian_r5(bindings: Bindings) -> Result<AmbientModel, AmbientError> {
    let coords = ["x1", "x2", "y1", "y2", "z"];
    // eta = (dz - y1 dx1 - y2 dx2) / 2, g = eta (x) eta + (1/4) sum(dx^2 + dy^2)
    let eta = ["(-y1/2)", "(-y2/2)", "0", "0", "(1/2)"];
    let metric: Vec<Vec<String>> = (0..5)
        .map(|i| {
            (0..5)
                .map(|j| {
                    let diag = if i == j && i < 4 { " + 1/4" } else { "" };
                    format!("{}*{}{diag}", eta[i], eta[j])
                })
                .collect()
        })
        .collect();
    // phi d/dx_i = -d/dy_i, phi d/dy_i = d/dx_i + y_i d/dz, phi d/dz = 0
    let mut phi = vec![vec!["0".to_string(); 5]; 5];
    for i in 0..2 {
        phi[2 + i][i] = "-1".into();
        phi[i][2 + i] = "1".into();
        phi[4][2 + i] = coords[2 + i].into();
    }
    let xi: Vec<String> = ["0", "0", "0", "0", "2"].iter().map(|s| s.to_string()).collect();
    let eta: Vec<String> = eta.iter().map(|s| s.to_string()).collect();
    let tag = ClassicalTag::Sasaki(-3.0);
    Ok(AmbientModel {
        name: "sasakian_R5".into(),
        kind: AmbientKind::GeneralizedSasakian,
        dim: 5,
        coords: coords.iter().map(|s| s.to_string()).collect(),
        backend: Backend::Chart { metric: expr_matrix(&metric, &coords, "metric")? },
        structure: StructureExprs::Contact {
            phi: expr_matrix(&phi, &coords, "phi")?,
            xi: exprs(&xi, &coords, "xi")?,
            eta: exprs(&eta, &coords, "eta")?,
        },
        coefficients: contact_coefficients(tag, &coords)?,
        tag: Some(tag),
        certified: true,
        bindings,
    })
}

fn sasakian_sphere(bindings: Bindings) -> Result<AmbientModel, AmbientError> {
    let coords = ["x1", "y1", "x2", "y2", "x3", "y3"];
    // xi = -J x, phi = J - x xi^T (tangential part of J), eta = xi
    let xi_src = ["y1", "(-x1)", "y2", "(-x2)", "y3", "(-x3)"];
    let j = interleaved_j(6);
    let phi: Vec<Vec<String>> = (0..6)
        .map(|a| (0..6).map(|b| format!("{} - {}*{}", num(j[(a, b)]), coords[a], xi_src[b])).collect())
        .collect();
    let xi: Vec<String> = xi_src.iter().map(|s| s.to_string()).collect();
    let normal: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
    let constraint = "x1^2 + y1^2 + x2^2 + y2^2 + x3^2 + y3^2 - 1".to_string();
    // inverse stereographic projection from the pole y3 = 1
    let params = ["p1", "p2", "p3", "p4", "p5"];
    let s = "(p1^2 + p2^2 + p3^2 + p4^2 + p5^2)";
    let mut chart: Vec<String> = params.iter().map(|p| format!("2*{p}/(1 + {s})")).collect();
    chart.push(format!("({s} - 1)/({s} + 1)"));
    let tag = ClassicalTag::Sasaki(1.0);
    Ok(AmbientModel {
        name: "sasakian_sphere_S5".into(),
        kind: AmbientKind::GeneralizedSasakian,
        dim: 5,
        coords: coords.iter().map(|s| s.to_string()).collect(),
        backend: Backend::Embedded {
            normals: vec![exprs(&normal, &coords, "normal")?],
            constraints: vec![parse_with(&constraint, &coords, "constraint")?],
            chart: exprs(&chart, &params, "chart")?,
        },
        structure: StructureExprs::Contact {
            phi: expr_matrix(&phi, &coords, "phi")?,
            xi: exprs(&xi, &coords, "xi")?,
            eta: exprs(&xi, &coords, "eta")?,
        },
        coefficients: contact_coefficients(tag, &coords)?,
        tag: Some(tag),
        certified: true,
        bindings,
    })
}

fn product_contact(name: &str, bindings: Bindings) -> Result<AmbientModel, AmbientError> {
    let coords = ["x1", "x2", "y1", "y2", "t"];
    let (warp, tag) = if name == "kenmotsu_H5" {
        ("exp(2*t)", ClassicalTag::Kenmotsu(-1.0))
    } else {
        ("1", ClassicalTag::Cosymplectic(0.0))
    };
    let metric: Vec<Vec<String>> = (0..5)
        .map(|i| {
            (0..5)
                .map(|j| match (i == j, i) {
                    (true, 4) => "1".to_string(),
                    (true, _) => warp.to_string(),
                    _ => "0".to_string(),
                })
                .collect()
        })
        .collect();
    let unit_t: Vec<String> = ["0", "0", "0", "0", "1"].iter().map(|s| s.to_string()).collect();
    Ok(AmbientModel {
        name: name.to_string(),
        kind: AmbientKind::GeneralizedSasakian,
        dim: 5,
        coords: coords.iter().map(|s| s.to_string()).collect(),
        backend: Backend::Chart { metric: expr_matrix(&metric, &coords, "metric")? },
        structure: StructureExprs::Contact {
            phi: expr_matrix(&constant_matrix(&product_phi()), &coords, "phi")?,
            xi: exprs(&unit_t, &coords, "xi")?,
            eta: exprs(&unit_t, &coords, "eta")?,
        },
        coefficients: contact_coefficients(tag, &coords)?,
        tag: Some(tag),
        certified: true,
        bindings,
    })
}
