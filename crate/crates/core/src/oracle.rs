//! Finite-difference cross-check of the jet-computed normal Laplacian.
//!
//! Only flat charts are supported: there the ambient connection is the
//! coordinate derivative, so `H` sampled on a parameter stencil is enough.
//! The rough Laplacian of `H` along the immersion has normal part
//! `Lap_perp H - tr B(., A_H .)`, which gives the comparison formula.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambient::{AmbientError, AmbientModel, Backend};
use crate::jetla;
use crate::submanifold::{analyze, point_geometry, ImmersionModel, SubmanifoldError};

pub const DEFAULT_STEPS: [f64; 4] = [0.08, 0.04, 0.02, 0.01];

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("finite-difference oracle needs a flat chart ambient; '{0}' is not one")]
    NotFlat(String),
    #[error(transparent)]
    Ambient(#[from] AmbientError),
    #[error(transparent)]
    Geometry(#[from] SubmanifoldError),
    #[error("need at least two steps")]
    TooFewSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepError {
    pub step: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub point: Vec<f64>,
    pub jet_value: Vec<f64>,
    pub errors: Vec<StepError>,
    /// `log2(err(h) / err(h/2))` for consecutive halvings.
    pub orders: Vec<f64>,
    pub observed_order: f64,
}

/// Christoffel symbols and their first derivatives vanish at `x`.
fn flat_at(space: &AmbientModel, x: &[f64]) -> Result<bool, AmbientError> {
    if !matches!(space.backend, Backend::Chart { .. }) {
        return Ok(false);
    }
    let gamma = space.christoffel_jet(x, 1)?;
    Ok(gamma.iter().flatten().flatten().all(|j| j.partials().iter().all(|d| d.abs() < 1e-14)))
}

/// `Lap_perp H` at `u` from second differences of `H` with step `h`.
pub fn fd_laplacian_h(space: &AmbientModel, imm: &ImmersionModel, u: &[f64], h: f64) -> Result<DVector<f64>, OracleError> {
    let m = imm.dim();
    let (pg, nd) = analyze(space, imm, u)?;
    if !flat_at(space, pg.state.point.as_slice())? {
        return Err(OracleError::NotFlat(space.name.clone()));
    }
    let mean_at = |offsets: &[(usize, f64)]| -> Result<DVector<f64>, OracleError> {
        let mut v = u.to_vec();
        for &(i, s) in offsets {
            v[i] += s * h;
        }
        let pt = point_geometry(space, imm, &v)?;
        if !flat_at(space, pt.state.point.as_slice())? {
            return Err(OracleError::NotFlat(space.name.clone()));
        }
        Ok(pt.mean_curvature)
    };
    let h0 = &pg.mean_curvature;
    let mut first = Vec::with_capacity(m);
    let mut second = vec![vec![DVector::zeros(h0.len()); m]; m];
    for i in 0..m {
        let plus = mean_at(&[(i, 1.0)])?;
        let minus = mean_at(&[(i, -1.0)])?;
        first.push((&plus - &minus) / (2.0 * h));
        second[i][i] = (plus - h0 * 2.0 + minus) / (h * h);
        for j in 0..i {
            let pp = mean_at(&[(i, 1.0), (j, 1.0)])?;
            let pm = mean_at(&[(i, 1.0), (j, -1.0)])?;
            let mp = mean_at(&[(i, -1.0), (j, 1.0)])?;
            let mm = mean_at(&[(i, -1.0), (j, -1.0)])?;
            let d = (pp - pm - mp + mm) / (4.0 * h * h);
            second[i][j] = d.clone();
            second[j][i] = d;
        }
    }
    let induced = jetla::truncate_mat(&pg.induced_metric, 1);
    let gamma = jetla::christoffel_symbols(&induced).ok_or(SubmanifoldError::RankDeficient(0.0))?;
    let ginv = jetla::mat_values(&pg.induced_metric).try_inverse().ok_or(SubmanifoldError::RankDeficient(0.0))?;
    let mut rough = DVector::zeros(h0.len());
    for i in 0..m {
        for j in 0..m {
            let mut term = second[i][j].clone();
            for (k, dk) in first.iter().enumerate() {
                term -= dk * gamma[k][i][j].value();
            }
            rough += term * ginv[(i, j)];
        }
    }
    let st = &pg.state;
    let normal_part = pg
        .frames
        .normal
        .iter()
        .fold(DVector::zeros(h0.len()), |acc, nu| acc + nu * st.inner(&rough, nu));
    Ok(normal_part + nd.trace_b_ah)
}

/// Compares the jet value of `Lap_perp H` against finite differences at each
/// step. Steps should halve successively for the orders to be meaningful.
pub fn convergence(space: &AmbientModel, imm: &ImmersionModel, u: &[f64], steps: &[f64]) -> Result<ConvergenceStudy, OracleError> {
    if steps.len() < 2 {
        return Err(OracleError::TooFewSteps);
    }
    let (_, nd) = analyze(space, imm, u)?;
    let exact = nd.laplacian_h;
    let errors = steps
        .iter()
        .map(|&h| Ok(StepError { step: h, error: (fd_laplacian_h(space, imm, u, h)? - &exact).norm() }))
        .collect::<Result<Vec<_>, OracleError>>()?;
    let orders: Vec<f64> = errors
        .windows(2)
        .map(|w| (w[0].error / w[1].error).ln() / (w[0].step / w[1].step).ln())
        .collect();
    let observed_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ConvergenceStudy { point: u.to_vec(), jet_value: exact.iter().copied().collect(), errors, orders, observed_order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::catalog;
    use crate::expr::{parse_expression, Bindings};
    use crate::submanifold::Domain;
    use std::collections::BTreeMap;

    fn graph() -> ImmersionModel {
        let params = ["u1", "u2"];
        let comps = ["u1", "u2", "0.4*u1^2 + 0.3*u1*u2 - 0.2*u2^3", "0.1*sin(u1 + u2)", "0.5*u2^2"];
        ImmersionModel {
            name: "graph".into(),
            params: params.iter().map(|s| s.to_string()).collect(),
            components: comps.iter().map(|c| parse_expression(c, &params).unwrap()).collect(),
            domain: Domain::new(vec![-0.5; 2], vec![0.5; 2], vec![false; 2], vec![3; 2]),
            bindings: Bindings::new(),
        }
    }

    #[test]
    fn second_order_convergence_on_graph() {
        let space = catalog("cosymplectic_R5", &BTreeMap::new()).unwrap();
        let study = convergence(&space, &graph(), &[0.2, -0.1], &DEFAULT_STEPS).unwrap();
        assert!(study.jet_value.iter().any(|v| v.abs() > 1e-2), "{study:?}");
        assert!(study.observed_order >= 1.9, "{study:?}");
        assert!(study.errors.last().unwrap().error < 1e-3);
    }

    #[test]
    fn curved_charts_are_refused() {
        let space = catalog("kenmotsu_H5", &BTreeMap::new()).unwrap();
        assert!(matches!(fd_laplacian_h(&space, &graph(), &[0.2, -0.1], 0.01), Err(OracleError::NotFlat(_))));
    }
}
