//! Small dense vectors and matrices whose entries are jets.

use nalgebra::{DMatrix, DVector};

use crate::jet::Jet;

pub type JetVec = Vec<Jet>;
pub type JetMat = Vec<Vec<Jet>>;

pub fn sum<'a>(nvars: usize, order: usize, terms: impl IntoIterator<Item = &'a Jet>) -> Jet {
    terms.into_iter().fold(Jet::zero(nvars, order), |acc, t| &acc + t)
}

pub fn values(v: &[Jet]) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().map(Jet::value))
}

pub fn mat_values(m: &JetMat) -> DMatrix<f64> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows, cols, |i, j| m[i][j].value())
}

pub fn constant_vec(v: &DVector<f64>, nvars: usize, order: usize) -> JetVec {
    v.iter().map(|&x| Jet::constant(nvars, order, x)).collect()
}

pub fn constant_mat(m: &DMatrix<f64>, nvars: usize, order: usize) -> JetMat {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| Jet::constant(nvars, order, m[(i, j)])).collect()).collect()
}

pub fn add(a: &[Jet], b: &[Jet]) -> JetVec {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[Jet], b: &[Jet]) -> JetVec {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[Jet], s: &Jet) -> JetVec {
    a.iter().map(|x| x * s).collect()
}

pub fn scale_f(a: &[Jet], s: f64) -> JetVec {
    a.iter().map(|x| x.scale(s)).collect()
}

pub fn truncate(a: &[Jet], order: usize) -> JetVec {
    a.iter().map(|x| x.truncate(order)).collect()
}

pub fn truncate_mat(m: &JetMat, order: usize) -> JetMat {
    m.iter().map(|r| truncate(r, order)).collect()
}

pub fn derivative(a: &[Jet], var: usize) -> JetVec {
    a.iter().map(|x| x.derivative(var)).collect()
}

pub fn mat_vec(m: &JetMat, v: &[Jet]) -> JetVec {
    m.iter()
        .map(|row| {
            let mut acc = &row[0] * &v[0];
            for (a, b) in row.iter().zip(v).skip(1) {
                acc = &acc + &(a * b);
            }
            acc
        })
        .collect()
}

/// `a^T g b`.
pub fn inner(g: &JetMat, a: &[Jet], b: &[Jet]) -> Jet {
    let gb = mat_vec(g, b);
    let mut acc = &a[0] * &gb[0];
    for (x, y) in a.iter().zip(&gb).skip(1) {
        acc = &acc + &(x * y);
    }
    acc
}

pub fn mat_mul(a: &JetMat, b: &JetMat) -> JetMat {
    let n = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..n)
                .map(|j| {
                    let mut acc = &row[0] * &b[0][j];
                    for (k, x) in row.iter().enumerate().skip(1) {
                        acc = &acc + &(x * &b[k][j]);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Inverse of a jet matrix, or `None` if its value slot is singular.
///
/// Writes `M = M0 (I + M0^{-1} D)` with `D` nilpotent in the truncated jet
/// ring, so the Neumann series terminates after `order` terms.
pub fn invert(m: &JetMat) -> Option<JetMat> {
    let n = m.len();
    let proto = &m[0][0];
    let (nvars, order) = (proto.nvars(), proto.order());
    let m0 = mat_values(m);
    let m0_inv = m0.clone().try_inverse()?;
    if !m0_inv.iter().all(|x| x.is_finite()) {
        return None;
    }
    // X = -M0^{-1} (M - M0)
    let x: JetMat = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut acc = Jet::zero(nvars, order);
                    for k in 0..n {
                        acc = &acc + &m[k][j].add_scalar(-m0[(k, j)]).scale(-m0_inv[(i, k)]);
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let base = constant_mat(&m0_inv, nvars, order);
    let mut result = base.clone();
    let mut term = base;
    for _ in 0..order {
        term = mat_mul(&x, &term);
        for i in 0..n {
            for j in 0..n {
                result[i][j] = &result[i][j] + &term[i][j];
            }
        }
    }
    Some(result)
}

/// Christoffel symbols `gamma[k][i][j]` of a metric given by jets in its
/// own coordinates. The result has one order less than `g`.
pub fn christoffel_symbols(g: &JetMat) -> Option<Vec<JetMat>> {
    let n = g.len();
    let order = g[0][0].order().checked_sub(1)?;
    let nvars = g[0][0].nvars();
    let ginv = invert(g)?;
    let ginv: JetMat = ginv.iter().map(|r| truncate(r, order)).collect();
    let dg: Vec<JetMat> = (0..n).map(|l| g.iter().map(|row| derivative(row, l)).collect()).collect();
    // lowered[l][i][j] = (d_i g_lj + d_j g_li - d_l g_ij) / 2
    let mut lowered = vec![vec![vec![Jet::zero(nvars, order); n]; n]; n];
    for (l, low) in lowered.iter_mut().enumerate() {
        for i in 0..n {
            for j in i..n {
                let v = (&(&dg[i][l][j] + &dg[j][l][i]) - &dg[l][i][j]).scale(0.5);
                low[i][j] = v.clone();
                low[j][i] = v;
            }
        }
    }
    let mut gamma = vec![vec![vec![Jet::zero(nvars, order); n]; n]; n];
    for (k, gk) in gamma.iter_mut().enumerate() {
        for i in 0..n {
            for j in i..n {
                let terms: Vec<Jet> = (0..n).map(|l| &ginv[k][l] * &lowered[l][i][j]).collect();
                let v = sum(nvars, order, &terms);
                gk[i][j] = v.clone();
                gk[j][i] = v;
            }
        }
    }
    Some(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_times_matrix_is_identity() {
        let vars = Jet::variables(&[0.3, -0.2], 3);
        let m: JetMat = vec![
            vec![(&vars[0] * &vars[0]).add_scalar(2.0), vars[1].sin()],
            vec![vars[1].sin(), vars[0].exp()],
        ];
        let inv = invert(&m).unwrap();
        let prod = mat_mul(&m, &inv);
        for (i, row) in prod.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((e.value() - expect).abs() < 1e-14);
                assert!(e.partials()[1..].iter().all(|d| d.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn singular_value_slot_is_rejected() {
        let z = Jet::variables(&[0.0], 2);
        let m: JetMat = vec![vec![z[0].clone(), z[0].clone()], vec![z[0].clone(), z[0].clone()]];
        assert!(invert(&m).is_none());
    }
}
