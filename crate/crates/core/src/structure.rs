//! Splitting the ambient structure tensor along a submanifold.
//!
//! For tangent `X` and normal `v`, `J X` (or `phi X`) splits into a tangent
//! and a normal part, and so does `J v`. The four blocks are stored as
//! matrices in orthonormal frames.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambient::{orthonormalize, AmbientKind, AmbientState, PointStructure};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructureError {
    #[error("frames are not orthonormal (Gram deviation {0:e})")]
    NonOrthonormal(f64),
    #[error("tangent vectors span only {found} of {expected} dimensions")]
    RankDeficient { found: usize, expected: usize },
}

/// Orthonormal tangent and normal frames at a point, as ambient vectors.
#[derive(Debug, Clone)]
pub struct Frames {
    pub tangent: Vec<DVector<f64>>,
    pub normal: Vec<DVector<f64>>,
}

impl Frames {
    /// Gram-Schmidt with pivoting on `tangents`, then on the ambient tangent
    /// space basis for the normal complement.
    pub fn from_tangents(st: &AmbientState, tangents: &[DVector<f64>], ambient_dim: usize, tol: f64) -> Result<Self, StructureError> {
        let m = tangents.len();
        let tangent = orthonormalize(&[], tangents, &st.metric, m, tol);
        if tangent.len() < m {
            return Err(StructureError::RankDeficient { found: tangent.len(), expected: m });
        }
        let n = st.ncoords();
        let candidates: Vec<DVector<f64>> = (0..n).map(|i| st.projector.column(i).into_owned()).collect();
        let normal = orthonormalize(&tangent, &candidates, &st.metric, ambient_dim - m, 1e-10);
        if normal.len() < ambient_dim - m {
            return Err(StructureError::RankDeficient { found: m + normal.len(), expected: ambient_dim });
        }
        Ok(Frames { tangent, normal })
    }

    /// Frames `X'_i = sum_j X_j q_t[j][i]`, likewise for normals.
    pub fn rotated(&self, q_tangent: &DMatrix<f64>, q_normal: &DMatrix<f64>) -> Frames {
        let mix = |vs: &[DVector<f64>], q: &DMatrix<f64>| -> Vec<DVector<f64>> {
            (0..vs.len())
                .map(|i| vs.iter().enumerate().fold(DVector::zeros(vs[0].len()), |acc, (j, v)| acc + v * q[(j, i)]))
                .collect()
        };
        Frames { tangent: mix(&self.tangent, q_tangent), normal: mix(&self.normal, q_normal) }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.tangent.len(), self.normal.len())
    }

    pub fn gram_deviation(&self, st: &AmbientState) -> f64 {
        let all: Vec<&DVector<f64>> = self.tangent.iter().chain(&self.normal).collect();
        let mut dev: f64 = 0.0;
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((st.inner(a, b) - target).abs());
            }
        }
        dev
    }

    /// Components of `v` in the tangent frame.
    pub fn tangent_coords(&self, st: &AmbientState, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.tangent.len(), self.tangent.iter().map(|x| st.inner(x, v)))
    }

    /// Components of `v` in the normal frame.
    pub fn normal_coords(&self, st: &AmbientState, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.normal.len(), self.normal.iter().map(|x| st.inner(x, v)))
    }

    pub fn tangent_vector(&self, coords: &DVector<f64>) -> DVector<f64> {
        combine(&self.tangent, coords)
    }

    pub fn normal_vector(&self, coords: &DVector<f64>) -> DVector<f64> {
        combine(&self.normal, coords)
    }
}

fn combine(frame: &[DVector<f64>], coords: &DVector<f64>) -> DVector<f64> {
    frame.iter().zip(coords.iter()).fold(DVector::zeros(frame[0].len()), |acc, (v, c)| acc + v * *c)
}

/// The four blocks of the structure tensor in orthonormal frames. For a
/// complex ambient these are `(j, k, l, m)`, for a contact one `(P, N, t, s)`.
#[derive(Debug, Clone)]
pub struct DecompositionOperators {
    pub kind: AmbientKind,
    /// tangent -> tangent (`j` or `P`), `m x m`.
    pub tangent_tangent: DMatrix<f64>,
    /// tangent -> normal (`k` or `N`), `q x m`.
    pub tangent_normal: DMatrix<f64>,
    /// normal -> tangent (`l` or `t`), `m x q`.
    pub normal_tangent: DMatrix<f64>,
    /// normal -> normal (`m` or `s`), `q x q`.
    pub normal_normal: DMatrix<f64>,
    /// Frame components of the tangent and normal parts of `xi`.
    pub xi_tangent: Option<DVector<f64>>,
    pub xi_normal: Option<DVector<f64>>,
}

pub fn decompose(st: &AmbientState, frames: &Frames) -> Result<DecompositionOperators, StructureError> {
    let dev = frames.gram_deviation(st);
    if dev > 1e-10 {
        return Err(StructureError::NonOrthonormal(dev));
    }
    let (m, q) = frames.dims();
    let images_t: Vec<DVector<f64>> = frames.tangent.iter().map(|x| st.apply_structure(x)).collect();
    let images_n: Vec<DVector<f64>> = frames.normal.iter().map(|v| st.apply_structure(v)).collect();
    let tt = DMatrix::from_fn(m, m, |i, a| st.inner(&frames.tangent[i], &images_t[a]));
    let tn = DMatrix::from_fn(q, m, |b, a| st.inner(&frames.normal[b], &images_t[a]));
    let nt = DMatrix::from_fn(m, q, |i, a| st.inner(&frames.tangent[i], &images_n[a]));
    let nn = DMatrix::from_fn(q, q, |b, a| st.inner(&frames.normal[b], &images_n[a]));
    let (kind, xi_tangent, xi_normal) = match &st.structure {
        PointStructure::Complex { .. } => (AmbientKind::GeneralizedComplex, None, None),
        PointStructure::Contact { xi, .. } => (
            AmbientKind::GeneralizedSasakian,
            Some(frames.tangent_coords(st, xi)),
            Some(frames.normal_coords(st, xi)),
        ),
    };
    Ok(DecompositionOperators {
        kind,
        tangent_tangent: tt,
        tangent_normal: tn,
        normal_tangent: nt,
        normal_normal: nn,
        xi_tangent,
        xi_normal,
    })
}

/// Largest singular value; zero for empty matrices.
pub fn operator_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.norm()
}

/// Residual norm of each algebraic relation between the blocks.
pub fn verify_relations(ops: &DecompositionOperators) -> BTreeMap<String, f64> {
    let (j, k, l, mm) = (&ops.tangent_tangent, &ops.tangent_normal, &ops.normal_tangent, &ops.normal_normal);
    let (m, q) = (j.nrows(), mm.nrows());
    let id_t = DMatrix::<f64>::identity(m, m);
    let id_n = DMatrix::<f64>::identity(q, q);
    let mut out = BTreeMap::new();
    let mut put = |name: &str, a: DMatrix<f64>| {
        out.insert(name.to_string(), operator_norm(&a));
    };
    put("tangent_skew", j + j.transpose());
    put("normal_skew", mm + mm.transpose());
    put("adjoint", k + l.transpose());
    match (&ops.xi_tangent, &ops.xi_normal) {
        (Some(xt), Some(xn)) => {
            // phi^2 = -Id + eta (x) xi split into blocks
            put("square_tangent", j * j + l * k + &id_t - xt * xt.transpose());
            put("square_normal", mm * mm + k * l + &id_n - xn * xn.transpose());
            put("square_tangent_normal", k * j + mm * k - xn * xt.transpose());
            put("square_normal_tangent", j * l + l * mm - xt * xn.transpose());
            let kills_xi_t = j * xt + l * xn;
            let kills_xi_n = k * xt + mm * xn;
            out.insert("phi_xi_tangent".into(), kills_xi_t.norm());
            out.insert("phi_xi_normal".into(), kills_xi_n.norm());
            out.insert("xi_unit".into(), (xt.norm_squared() + xn.norm_squared() - 1.0).abs());
        }
        _ => {
            put("square_tangent", j * j + l * k + &id_t);
            put("square_normal", mm * mm + k * l + &id_n);
            put("mixed_normal_tangent", j * l + l * mm);
            put("mixed_tangent_normal", k * j + mm * k);
        }
    }
    out
}

/// A classification flag with the measured norm that decided it. `value`
/// is `None` where the flag is not applicable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub value: Option<bool>,
    #[serde(with = "crate::numfmt::nan_as_null")]
    pub measured: f64,
}

impl Flag {
    fn below(measured: f64, tol: f64) -> Flag {
        Flag { value: Some(measured < tol), measured }
    }

    fn not_applicable() -> Flag {
        Flag { value: None, measured: f64::NAN }
    }

    pub fn holds(&self) -> bool {
        self.value == Some(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationFlags {
    pub is_curve: bool,
    pub is_hypersurface: bool,
    pub is_complex: Flag,
    pub is_lagrangian: Flag,
    pub is_invariant: Flag,
    pub is_anti_invariant: Flag,
    pub xi_tangent: Flag,
    pub xi_normal: Flag,
    pub phi_h_tangent: Flag,
    pub phi_h_normal: Flag,
}

impl ClassificationFlags {
    /// A submanifold with `xi` normal must be anti-invariant; this holds in
    /// contact metric ambients.
    pub fn xi_normal_consistent(&self) -> bool {
        !self.xi_normal.holds() || self.is_anti_invariant.holds()
    }
}

/// Flags from the block norms (Frobenius). `h_normal` is the mean curvature
/// in normal-frame components; the `phi H` flags use its direction and are
/// not applicable when `|H| <= tol`.
pub fn classify(ops: &DecompositionOperators, dims: (usize, usize), h_normal: &DVector<f64>, tol: f64) -> ClassificationFlags {
    let (m, ambient) = dims;
    let tt = frobenius(&ops.tangent_tangent);
    let tn = frobenius(&ops.tangent_normal);
    let nt = frobenius(&ops.normal_tangent);
    let nn = frobenius(&ops.normal_normal);
    let na = Flag::not_applicable;
    let h_norm = h_normal.norm();
    let h_dir = if h_norm > tol { Some(h_normal / h_norm) } else { None };
    let phi_h = |block: &DMatrix<f64>| match &h_dir {
        Some(d) => Flag::below((block * d).norm(), tol),
        None => na(),
    };
    match ops.kind {
        AmbientKind::GeneralizedComplex => ClassificationFlags {
            is_curve: m == 1,
            is_hypersurface: m + 1 == ambient,
            is_complex: Flag::below(tn.max(nt), tol),
            is_lagrangian: if m == 2 && ambient == 4 { Flag::below(tt.max(nn), tol) } else { Flag { value: Some(false), measured: tt.max(nn) } },
            is_invariant: na(),
            is_anti_invariant: na(),
            xi_tangent: na(),
            xi_normal: na(),
            phi_h_tangent: na(),
            phi_h_normal: na(),
        },
        AmbientKind::GeneralizedSasakian => {
            let xt = ops.xi_tangent.as_ref().map_or(0.0, |v| v.norm());
            let xn = ops.xi_normal.as_ref().map_or(0.0, |v| v.norm());
            ClassificationFlags {
                is_curve: m == 1,
                is_hypersurface: m + 1 == ambient,
                is_complex: na(),
                is_lagrangian: na(),
                is_invariant: Flag::below(tn, tol),
                is_anti_invariant: Flag::below(tt, tol),
                xi_tangent: Flag::below(xn, tol),
                xi_normal: Flag::below(xt, tol),
                phi_h_tangent: phi_h(&ops.normal_normal),
                phi_h_normal: phi_h(&ops.normal_tangent),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::catalog;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap as Map;

    fn random_vectors(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<DVector<f64>> {
        (0..count).map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))).collect()
    }

    fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        if n == 0 {
            return DMatrix::zeros(0, 0);
        }
        DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)).qr().q()
    }

    #[test]
    fn complex_relations_on_random_frames() {
        let amb = catalog("flat_C2", &Map::new()).unwrap();
        let st = amb.state(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for trial in 0..100 {
            let m = 1 + trial % 3;
            let frames = Frames::from_tangents(&st, &random_vectors(&mut rng, 4, m), 4, 1e-8).unwrap();
            let ops = decompose(&st, &frames).unwrap();
            for (name, r) in verify_relations(&ops) {
                assert!(r <= 1e-12, "{name}: {r}");
            }
        }
    }

    #[test]
    fn contact_relations_on_random_planes() {
        let amb = catalog("sasakian_R5", &Map::new()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let st = amb.state(&x).unwrap();
            let frames = Frames::from_tangents(&st, &random_vectors(&mut rng, 5, 2), 5, 1e-8).unwrap();
            let ops = decompose(&st, &frames).unwrap();
            for (name, r) in verify_relations(&ops) {
                assert!(r <= 1e-10, "{name}: {r}");
            }
        }
    }

    #[test]
    fn violated_relation_is_measured() {
        let ops = DecompositionOperators {
            kind: AmbientKind::GeneralizedComplex,
            tangent_tangent: DMatrix::identity(2, 2),
            tangent_normal: DMatrix::zeros(2, 2),
            normal_tangent: DMatrix::zeros(2, 2),
            normal_normal: DMatrix::zeros(2, 2),
            xi_tangent: None,
            xi_normal: None,
        };
        assert!((verify_relations(&ops)["square_tangent"] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn non_orthonormal_frames_are_rejected() {
        let amb = catalog("flat_C2", &Map::new()).unwrap();
        let st = amb.state(&[0.0; 4]).unwrap();
        let mut frames = Frames::from_tangents(&st, &[DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0])], 4, 1e-8).unwrap();
        frames.tangent[0] *= 2.0;
        assert!(matches!(decompose(&st, &frames), Err(StructureError::NonOrthonormal(_))));
    }

    #[test]
    fn torus_is_lagrangian_and_sphere_is_not() {
        let amb = catalog("flat_C2", &Map::new()).unwrap();
        // (a cos u, a sin u, b cos v, b sin v) at u = 0.3, v = 1.1
        let (u, v) = (0.3f64, 1.1f64);
        let p = [2.0 * u.cos(), 2.0 * u.sin(), v.cos(), v.sin()];
        let st = amb.state(&p).unwrap();
        let tangents = [
            DVector::from_vec(vec![-u.sin(), u.cos(), 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, -v.sin(), v.cos()]),
        ];
        let frames = Frames::from_tangents(&st, &tangents, 4, 1e-8).unwrap();
        let ops = decompose(&st, &frames).unwrap();
        let flags = classify(&ops, (2, 4), &DVector::zeros(2), 1e-8);
        assert!(flags.is_lagrangian.holds());
        assert!(!flags.is_complex.holds());
        assert!(ops.tangent_tangent.norm() < 1e-12 && ops.normal_normal.norm() < 1e-12);

        // unit S^3 at a point: tangent space is the orthogonal complement of p
        let p = DVector::from_vec(vec![0.5, 0.5, 0.5, 0.5]);
        let st = amb.state(p.as_slice()).unwrap();
        let candidates: Vec<DVector<f64>> =
            (0..4).map(|i| DVector::from_fn(4, |k, _| if k == i { 1.0 } else { 0.0 }) - &p * p[i]).collect();
        let tangent = orthonormalize(&[], &candidates, &st.metric, 3, 1e-8);
        let frames = Frames::from_tangents(&st, &tangent, 4, 1e-8).unwrap();
        let ops = decompose(&st, &frames).unwrap();
        let flags = classify(&ops, (3, 4), &DVector::from_vec(vec![1.0]), 1e-8);
        assert!(flags.is_hypersurface && !flags.is_lagrangian.holds() && !flags.is_complex.holds());
        // hypersurfaces have no normal-normal part
        assert!(ops.normal_normal.norm() < 1e-14);
    }

    #[test]
    fn hyperplane_in_sasakian_chart_has_xi_tangent() {
        let amb = catalog("sasakian_R5", &Map::new()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let mut x: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            x[2] = 0.0;
            let st = amb.state(&x).unwrap();
            let tangents: Vec<DVector<f64>> = [0, 1, 3, 4]
                .iter()
                .map(|&i| DVector::from_fn(5, |k, _| if k == i { 1.0 } else { 0.0 }))
                .collect();
            let frames = Frames::from_tangents(&st, &tangents, 5, 1e-8).unwrap();
            let ops = decompose(&st, &frames).unwrap();
            let flags = classify(&ops, (4, 5), &DVector::zeros(1), 1e-8);
            assert!(flags.xi_tangent.holds());
            assert!(flags.phi_h_tangent.value.is_none());
            // Pt = 0, Nt = -Id
            let pt = &ops.tangent_tangent * &ops.normal_tangent;
            let nt = &ops.tangent_normal * &ops.normal_tangent + DMatrix::identity(1, 1);
            assert!(pt.norm() <= 1e-9 && nt.norm() <= 1e-9);
            // <N X, v> = -<X, t v>
            assert!((&ops.tangent_normal + ops.normal_tangent.transpose()).norm() <= 1e-12);
        }
    }

    #[test]
    fn flags_and_relations_are_frame_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for name in ["CP2", "sasakian_R5", "kenmotsu_H5"] {
            let amb = catalog(name, &Map::new()).unwrap();
            let n = amb.ncoords();
            for m in 1..amb.dim {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
                let st = amb.state(&x).unwrap();
                let frames = Frames::from_tangents(&st, &random_vectors(&mut rng, n, m), amb.dim, 1e-8).unwrap();
                let q = amb.dim - m;
                let h = DVector::from_fn(q, |_, _| rng.gen_range(-1.0..1.0));
                let base_ops = decompose(&st, &frames).unwrap();
                let base = classify(&base_ops, (m, amb.dim), &h, 1e-8);
                let base_rel = verify_relations(&base_ops);
                let (qt, qn) = (random_orthogonal(&mut rng, m), random_orthogonal(&mut rng, q));
                let turned = frames.rotated(&qt, &qn);
                let ops = decompose(&st, &turned).unwrap();
                let flags = classify(&ops, (m, amb.dim), &(qn.transpose() * &h), 1e-8);
                assert_eq!(flags.is_complex.value, base.is_complex.value);
                assert_eq!(flags.is_invariant.value, base.is_invariant.value);
                assert_eq!(flags.xi_tangent.value, base.xi_tangent.value);
                assert_eq!(flags.phi_h_normal.value, base.phi_h_normal.value);
                let pairs = [
                    (flags.is_complex.measured, base.is_complex.measured),
                    (flags.is_anti_invariant.measured, base.is_anti_invariant.measured),
                    (flags.phi_h_tangent.measured, base.phi_h_tangent.measured),
                ];
                for (a, b) in pairs {
                    assert!(a.is_nan() && b.is_nan() || (a - b).abs() <= 1e-9);
                }
                for (k, v) in verify_relations(&ops) {
                    assert!((v - base_rel[&k]).abs() <= 1e-9);
                }
            }
        }
    }
}
