//! Extrinsic geometry of an immersion from its jets.
//!
//! The immersion is differentiated to order four. Tangent fields, the second
//! fundamental form, the mean curvature field and its normal derivatives are
//! carried as jets in the parameters, so every quantity at a sample point is
//! exact up to roundoff.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambient::{AlongField, AmbientError, AmbientModel, AmbientState, Riemann};
use crate::expr::{evaluate_jet, Bindings, EvalError, Expr};
use crate::jet::Jet;
use crate::jetla::{self, JetMat, JetVec};
use crate::structure::{Frames, StructureError};

/// Jet order of the immersion components.
pub const IMMERSION_ORDER: usize = 4;
/// Smallest admissible singular value of the differential.
pub const RANK_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SubmanifoldError {
    #[error(transparent)]
    Ambient(#[from] AmbientError),
    #[error("evaluating immersion component {index}: {source}")]
    Eval { index: usize, source: EvalError },
    #[error("differential is rank deficient (smallest singular value {0:e})")]
    RankDeficient(f64),
    #[error("point leaves the ambient manifold (constraint violation {0:e})")]
    OffAmbient(f64),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("invalid immersion: {0}")]
    Invalid(String),
}

/// Parameter box with per-axis periodicity and sample counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub periodic: Vec<bool>,
    pub samples: Vec<usize>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, periodic: Vec<bool>, samples: Vec<usize>) -> Self {
        Domain { lo, hi, periodic, samples }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn axis(&self, a: usize) -> Vec<f64> {
        let (lo, hi, n) = (self.lo[a], self.hi[a], self.samples[a]);
        if n <= 1 {
            return vec![0.5 * (lo + hi)];
        }
        let steps = if self.periodic[a] { n } else { n - 1 };
        (0..n).map(|k| lo + (hi - lo) * k as f64 / steps as f64).collect()
    }

    /// Sample points, first axis varying slowest.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|a| self.axis(a)).collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out
    }

    /// Same box at twice the resolution; every old sample stays a sample.
    pub fn refined(&self) -> Domain {
        let samples = self
            .samples
            .iter()
            .zip(&self.periodic)
            .map(|(&n, &p)| if p { 2 * n } else { (2 * n).saturating_sub(1).max(1) })
            .collect();
        Domain { samples, ..self.clone() }
    }

    pub fn validate(&self, m: usize) -> Result<(), SubmanifoldError> {
        let ok = self.lo.len() == m && self.hi.len() == m && self.periodic.len() == m && self.samples.len() == m;
        if !ok {
            return Err(SubmanifoldError::Invalid(format!("domain must have {m} axes")));
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
            return Err(SubmanifoldError::Invalid("domain bounds must satisfy lo <= hi".into()));
        }
        if self.samples.iter().any(|&n| n == 0) {
            return Err(SubmanifoldError::Invalid("every axis needs at least one sample".into()));
        }
        Ok(())
    }
}

/// An immersion `u -> x(u)` into the ambient coordinates.
#[derive(Debug, Clone)]
pub struct ImmersionModel {
    pub name: String,
    pub params: Vec<String>,
    pub components: Vec<Expr>,
    pub domain: Domain,
    pub bindings: Bindings,
}

impl ImmersionModel {
    pub fn dim(&self) -> usize {
        self.params.len()
    }

    /// Component jets at `u`.
    pub fn jets(&self, u: &[f64], order: usize) -> Result<JetVec, SubmanifoldError> {
        self.components
            .iter()
            .enumerate()
            .map(|(index, e)| {
                evaluate_jet(e, u, order, &self.bindings).map_err(|source| SubmanifoldError::Eval { index, source })
            })
            .collect()
    }

    pub fn point(&self, u: &[f64]) -> Result<Vec<f64>, SubmanifoldError> {
        Ok(self.jets(u, 0)?.iter().map(Jet::value).collect())
    }

    /// The immersion precomposed with `u = change(v)`.
    pub fn reparametrized(&self, change: &[Expr], params: Vec<String>, domain: Domain) -> ImmersionModel {
        ImmersionModel {
            name: format!("{} (reparametrized)", self.name),
            params,
            components: self.components.iter().map(|c| c.substitute(change)).collect(),
            domain,
            bindings: self.bindings.clone(),
        }
    }

    pub fn validate(&self, space: &AmbientModel) -> Result<(), SubmanifoldError> {
        let m = self.dim();
        if m == 0 || m >= space.dim {
            return Err(SubmanifoldError::Invalid(format!(
                "intrinsic dimension {m} must lie in 1..{}",
                space.dim
            )));
        }
        if self.components.len() != space.ncoords() {
            return Err(SubmanifoldError::Invalid(format!(
                "immersion has {} components but ambient '{}' has {} coordinates",
                self.components.len(),
                space.name,
                space.ncoords()
            )));
        }
        if let Some(i) = self.components.iter().filter_map(Expr::max_param).max() {
            if i >= m {
                return Err(SubmanifoldError::Invalid(format!("parameter index {} exceeds {m}", i + 1)));
            }
        }
        self.domain.validate(m)
    }
}

/// Extrinsic data at one parameter point.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub u: Vec<f64>,
    pub state: AmbientState,
    pub frames: Frames,
    /// Induced metric in the parameters (jets to order two).
    pub induced_metric: JetMat,
    /// `second_fundamental[a][b] = B(X_a, X_b)`, ambient vectors.
    pub second_fundamental: Vec<Vec<DVector<f64>>>,
    pub mean_curvature: DVector<f64>,
    /// `shape_operators[c][(a, b)] = <B(X_a, X_b), v_c>`.
    pub shape_operators: Vec<DMatrix<f64>>,
}

impl PointGeometry {
    pub fn dim(&self) -> usize {
        self.frames.tangent.len()
    }

    pub fn h_norm(&self) -> f64 {
        self.state.norm(&self.mean_curvature)
    }

    pub fn b_norm_sq(&self) -> f64 {
        self.second_fundamental.iter().flatten().map(|v| self.state.inner(v, v)).sum()
    }

    /// Mean curvature in normal-frame components.
    pub fn h_normal(&self) -> DVector<f64> {
        self.frames.normal_coords(&self.state, &self.mean_curvature)
    }

    /// Shape operator of an arbitrary normal vector, in the tangent frame.
    pub fn shape_operator(&self, nu: &DVector<f64>) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_fn(m, m, |a, b| self.state.inner(&self.second_fundamental[a][b], nu))
    }

    /// Largest asymmetry of `B` in its two slots.
    pub fn b_asymmetry(&self) -> f64 {
        let m = self.dim();
        let mut d: f64 = 0.0;
        for a in 0..m {
            for b in 0..m {
                d = d.max(self.state.norm(&(&self.second_fundamental[a][b] - &self.second_fundamental[b][a])));
            }
        }
        d
    }
}

/// Normal-bundle derivatives of the mean curvature field at one point.
#[derive(Debug, Clone)]
pub struct NormalFieldDerivatives {
    /// `nabla_h[a]` is the normal covariant derivative of `H` along `X_a`.
    pub nabla_h: Vec<DVector<f64>>,
    pub laplacian_h: DVector<f64>,
    /// Gradient of `|H|^2`, an ambient tangent vector.
    pub grad_h_sq: DVector<f64>,
    /// `sum_a B(X_a, A_H X_a)`.
    pub trace_b_ah: DVector<f64>,
    /// `sum_a A_{nabla_{X_a} H}(X_a)`.
    pub trace_a_nabla_h: DVector<f64>,
}

/// Jet-level data along the immersion near one point.
struct JetGeometry {
    x0: Vec<f64>,
    tangents: Vec<JetVec>,
    induced: JetMat,
    induced_inv: JetMat,
    second: Vec<Vec<JetVec>>,
    mean: JetVec,
    /// Normal derivatives of `H` in the coordinate directions.
    nabla_h: Vec<JetVec>,
    /// `P_perp nabla_i (nabla_perp_j H)` at the point.
    second_nabla_h: Vec<Vec<DVector<f64>>>,
}

fn normal_projection(field: &AlongField, tangents: &[JetVec], ginv: &JetMat, v: &[Jet]) -> JetVec {
    let m = tangents.len();
    let dots: Vec<Jet> = tangents.iter().map(|e| field.inner(e, v)).collect();
    let mut out = v.to_vec();
    for i in 0..m {
        let mut coeff = &ginv[i][0] * &dots[0];
        for j in 1..m {
            coeff = &coeff + &(&ginv[i][j] * &dots[j]);
        }
        out = jetla::sub(&out, &jetla::scale(&tangents[i], &coeff));
    }
    out
}

fn jet_geometry(space: &AmbientModel, imm: &ImmersionModel, u: &[f64]) -> Result<JetGeometry, SubmanifoldError> {
    let m = imm.dim();
    let x = imm.jets(u, IMMERSION_ORDER)?;
    let x0: Vec<f64> = x.iter().map(Jet::value).collect();
    let violation = space.constraint_violation(&x0)?;
    if violation > 1e-9 {
        return Err(SubmanifoldError::OffAmbient(violation));
    }
    let field = space.along(&jetla::truncate(&x, 2))?;
    let tangents: Vec<JetVec> = (0..m).map(|i| jetla::derivative(&x, i)).collect();
    let induced: JetMat = (0..m)
        .map(|i| (0..m).map(|j| field.inner(&tangents[i], &tangents[j])).collect())
        .collect();
    let g0 = jetla::mat_values(&induced);
    let sigma_sq = g0.clone().symmetric_eigen().eigenvalues.min();
    if !(sigma_sq > RANK_TOLERANCE * RANK_TOLERANCE) {
        return Err(SubmanifoldError::RankDeficient(sigma_sq.max(0.0).sqrt()));
    }
    let induced_inv = jetla::invert(&induced).ok_or(SubmanifoldError::RankDeficient(0.0))?;
    let perp = |v: &[Jet]| normal_projection(&field, &tangents, &induced_inv, v);

    let mut second: Vec<Vec<JetVec>> = vec![Vec::with_capacity(m); m];
    for i in 0..m {
        for j in 0..m {
            let b = if j < i { second[j][i].clone() } else { perp(&field.covariant(i, &tangents[i], &tangents[j])) };
            second[i].push(b);
        }
    }
    let nv = m;
    let mut mean = jetla::truncate(&second[0][0], 2).iter().map(|j| Jet::zero(nv, j.order())).collect::<JetVec>();
    for i in 0..m {
        for j in 0..m {
            mean = jetla::add(&mean, &jetla::scale(&second[i][j], &induced_inv[i][j]));
        }
    }
    let mean = jetla::scale_f(&mean, 1.0 / m as f64);
    let nabla_h: Vec<JetVec> = (0..m).map(|j| perp(&field.covariant(j, &tangents[j], &mean))).collect();
    let second_nabla_h: Vec<Vec<DVector<f64>>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| jetla::values(&perp(&field.covariant(i, &tangents[i], &nabla_h[j]))))
                .collect()
        })
        .collect();
    Ok(JetGeometry { x0, tangents, induced, induced_inv, second, mean, nabla_h, second_nabla_h })
}

/// Coefficients `c[(i, a)]` with `X_a = sum_i c[(i, a)] E_i`.
fn frame_coefficients(st: &AmbientState, jg: &JetGeometry, frames: &Frames) -> DMatrix<f64> {
    let m = frames.tangent.len();
    let ginv = jetla::mat_values(&jg.induced_inv);
    let e: Vec<DVector<f64>> = jg.tangents.iter().map(|t| jetla::values(t)).collect();
    let dots = DMatrix::from_fn(m, m, |j, a| st.inner(&e[j], &frames.tangent[a]));
    ginv * dots
}

fn orient_hypersurface(st: &AmbientState, frames: &mut Frames, h: &DVector<f64>) {
    if frames.normal.len() != 1 {
        return;
    }
    let nu = &frames.normal[0];
    let s = st.inner(h, nu);
    let flip = if s.abs() > 1e-12 * (1.0 + st.norm(h)) {
        s < 0.0
    } else {
        nu.iter().find(|c| c.abs() > 1e-12).is_some_and(|c| *c < 0.0)
    };
    if flip {
        frames.normal[0] = -nu;
    }
}

/// Point geometry and normal derivatives in one pass.
pub fn analyze(
    space: &AmbientModel,
    imm: &ImmersionModel,
    u: &[f64],
) -> Result<(PointGeometry, NormalFieldDerivatives), SubmanifoldError> {
    let m = imm.dim();
    let jg = jet_geometry(space, imm, u)?;
    let st = space.state(&jg.x0)?;
    let raw: Vec<DVector<f64>> = jg.tangents.iter().map(|t| jetla::values(t)).collect();
    let mut frames = Frames::from_tangents(&st, &raw, space.dim, RANK_TOLERANCE)?;
    let mean_curvature = jetla::values(&jg.mean);
    orient_hypersurface(&st, &mut frames, &mean_curvature);
    let c = frame_coefficients(&st, &jg, &frames);

    let b_coord: Vec<Vec<DVector<f64>>> =
        jg.second.iter().map(|row| row.iter().map(|b| jetla::values(b)).collect()).collect();
    let combine = |vals: &[Vec<DVector<f64>>], a: usize, b: usize| {
        let mut out = DVector::zeros(st.ncoords());
        for i in 0..m {
            for j in 0..m {
                out += &vals[i][j] * (c[(i, a)] * c[(j, b)]);
            }
        }
        out
    };
    let second_fundamental: Vec<Vec<DVector<f64>>> =
        (0..m).map(|a| (0..m).map(|b| combine(&b_coord, a, b)).collect()).collect();
    let shape_operators = frames
        .normal
        .iter()
        .map(|nu| DMatrix::from_fn(m, m, |a, b| st.inner(&second_fundamental[a][b], nu)))
        .collect();
    let pg = PointGeometry {
        u: u.to_vec(),
        state: st,
        frames,
        induced_metric: jg.induced.clone(),
        second_fundamental,
        mean_curvature,
        shape_operators,
    };

    let dh_coord: Vec<DVector<f64>> = jg.nabla_h.iter().map(|v| jetla::values(v)).collect();
    let nabla_h: Vec<DVector<f64>> = (0..m)
        .map(|a| (0..m).fold(DVector::zeros(pg.state.ncoords()), |acc, i| acc + &dh_coord[i] * c[(i, a)]))
        .collect();

    // induced Christoffels at the point
    let gamma = jetla::christoffel_symbols(&jetla::truncate_mat(&jg.induced, 1))
        .ok_or(SubmanifoldError::RankDeficient(0.0))?;
    let ginv = jetla::mat_values(&jg.induced_inv);
    let mut laplacian_h = DVector::zeros(pg.state.ncoords());
    for i in 0..m {
        for j in 0..m {
            let mut term = jg.second_nabla_h[i][j].clone();
            for (k, dh) in dh_coord.iter().enumerate() {
                term -= dh * gamma[k][i][j].value();
            }
            laplacian_h += term * ginv[(i, j)];
        }
    }

    // d_j |H|^2 = 2 <nabla_perp_j H, H>
    let dh_sq: Vec<f64> = dh_coord.iter().map(|dh| 2.0 * pg.state.inner(dh, &pg.mean_curvature)).collect();
    let mut grad_h_sq = DVector::zeros(pg.state.ncoords());
    for i in 0..m {
        for j in 0..m {
            grad_h_sq += jetla::values(&jg.tangents[i]) * (ginv[(i, j)] * dh_sq[j]);
        }
    }
    let (trace_b_ah, trace_a_nabla_h) = curvature_traces(&pg, &nabla_h);
    let nd = NormalFieldDerivatives { nabla_h, laplacian_h, grad_h_sq, trace_b_ah, trace_a_nabla_h };
    Ok((pg, nd))
}

pub fn point_geometry(space: &AmbientModel, imm: &ImmersionModel, u: &[f64]) -> Result<PointGeometry, SubmanifoldError> {
    Ok(analyze(space, imm, u)?.0)
}

pub fn normal_derivatives(
    space: &AmbientModel,
    imm: &ImmersionModel,
    u: &[f64],
) -> Result<NormalFieldDerivatives, SubmanifoldError> {
    Ok(analyze(space, imm, u)?.1)
}

/// `(sum_a B(X_a, A_H X_a), sum_a A_{nabla_{X_a} H}(X_a))`.
pub fn curvature_traces(pg: &PointGeometry, nabla_h: &[DVector<f64>]) -> (DVector<f64>, DVector<f64>) {
    let m = pg.dim();
    let n = pg.state.ncoords();
    let a_h = pg.shape_operator(&pg.mean_curvature);
    let mut trace_b_ah = DVector::zeros(n);
    for a in 0..m {
        for b in 0..m {
            trace_b_ah += &pg.second_fundamental[a][b] * a_h[(b, a)];
        }
    }
    let mut trace_a = DVector::zeros(n);
    for (a, dh) in nabla_h.iter().enumerate() {
        for b in 0..m {
            trace_a += &pg.frames.tangent[b] * pg.state.inner(&pg.second_fundamental[a][b], dh);
        }
    }
    (trace_b_ah, trace_a)
}

/// Scalar curvature of the induced metric, and the same quantity through
/// the Gauss equation with the algebraic ambient curvature.
pub fn scalar_curvature(pg: &PointGeometry) -> Result<(f64, f64), SubmanifoldError> {
    let m = pg.dim();
    let intrinsic = if m == 1 {
        0.0
    } else {
        let gamma = jetla::christoffel_symbols(&jetla::truncate_mat(&pg.induced_metric, 2))
            .ok_or(SubmanifoldError::RankDeficient(0.0))?;
        let ginv = jetla::mat_values(&pg.induced_metric)
            .try_inverse()
            .ok_or(SubmanifoldError::RankDeficient(0.0))?;
        Riemann::from_christoffel(&gamma).scalar(&ginv)
    };
    let st = &pg.state;
    let mut ambient = 0.0;
    for xa in &pg.frames.tangent {
        for xb in &pg.frames.tangent {
            ambient += st.inner(&st.curvature(xa, xb, xb), xa);
        }
    }
    let h = pg.h_norm();
    let via_gauss = ambient + (m * m) as f64 * h * h - pg.b_norm_sq();
    Ok((intrinsic, via_gauss))
}

/// Deviation `|A_H - |H|^2 Id|` (Frobenius) and whether it is below `tol`;
/// `None` at minimal points.
pub fn pseudo_umbilical_check(pg: &PointGeometry, tol: f64) -> Option<(bool, f64)> {
    let h = pg.h_norm();
    if h <= tol {
        return None;
    }
    let m = pg.dim();
    let dev = (pg.shape_operator(&pg.mean_curvature) - DMatrix::identity(m, m) * (h * h)).norm();
    Some((dev < tol, dev))
}
