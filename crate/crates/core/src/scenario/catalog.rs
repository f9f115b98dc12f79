//! Built-in immersions, written as component expressions in catalog
//! parameters and the surface variables `u1, u2, ...`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, TAU};

use serde::Serialize;

use crate::submanifold::Domain;

#[derive(Debug, Clone, Serialize)]
pub struct ImmersionEntry {
    pub name: &'static str,
    pub summary: &'static str,
    /// Catalog parameters with their defaults.
    pub params: Vec<(&'static str, f64)>,
    pub components: Vec<String>,
    pub domain: Domain,
}

impl ImmersionEntry {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn variables(&self) -> Vec<String> {
        (1..=self.dim()).map(|i| format!("u{i}")).collect()
    }
}

/// `(cos a cos b, cos a sin b, sin a cos c, sin a sin c)` in the variables
/// with the given indices.
fn hopf(a: usize, b: usize, c: usize) -> [String; 4] {
    [
        format!("cos(u{a})*cos(u{b})"),
        format!("cos(u{a})*sin(u{b})"),
        format!("sin(u{a})*cos(u{c})"),
        format!("sin(u{a})*sin(u{c})"),
    ]
}

fn scaled(factor: &str, comps: &[String]) -> Vec<String> {
    comps.iter().map(|c| format!("{factor}*{c}")).collect()
}

fn strings(comps: &[&str]) -> Vec<String> {
    comps.iter().map(|s| s.to_string()).collect()
}

/// Latitude in `[0.2, 1.35]` and periodic angles, the usual Hopf grid.
fn hopf_domain(extra_front: Option<(f64, f64, bool, usize)>) -> Domain {
    let mut lo = vec![0.2, 0.0, 0.0];
    let mut hi = vec![1.35, TAU, TAU];
    let mut periodic = vec![false, true, true];
    let mut samples = vec![3, 3, 3];
    if let Some((l, h, p, n)) = extra_front {
        lo.insert(0, l);
        hi.insert(0, h);
        periodic.insert(0, p);
        samples.insert(0, n);
    }
    Domain::new(lo, hi, periodic, samples)
}

fn box_domain(m: usize, half: f64, n: usize) -> Domain {
    Domain::new(vec![-half; m], vec![half; m], vec![false; m], vec![n; m])
}

pub fn immersion_entries() -> Vec<ImmersionEntry> {
    let s3 = hopf(1, 2, 3);
    let s3_shifted = hopf(2, 3, 4);
    let mut round_r5 = scaled("r*cos(u1)", &s3_shifted);
    round_r5.push("r*sin(u1)".into());
    let mut small = scaled("rho*cos(u1)", &s3_shifted);
    small.extend(["rho*sin(u1)".to_string(), "sqrt(1 - rho^2)".to_string()]);
    let mut great = scaled("cos(u1)", &s3_shifted);
    great.extend(["sin(u1)".to_string(), "0".to_string()]);
    let mut clifford = strings(&["cos(theta)*cos(u1)", "cos(theta)*sin(u1)"]);
    clifford.extend(scaled("sin(theta)", &s3_shifted));
    vec![
        ImmersionEntry {
            name: "affine_plane",
            summary: "plane spanned by d/dx1 and cos(theta) d/dx2 + sin(theta) d/dy1 in a 4-dimensional chart",
            params: vec![("theta", 0.0)],
            components: strings(&["u1", "u2*sin(theta)", "u2*cos(theta)", "0"]),
            domain: box_domain(2, 1.0, 3),
        },
        ImmersionEntry {
            name: "round_hypersphere",
            summary: "round 3-sphere of radius r in a 4-dimensional chart",
            params: vec![("r", 1.0)],
            components: scaled("r", &s3),
            domain: hopf_domain(None),
        },
        ImmersionEntry {
            name: "round_hypersphere_R5",
            summary: "round 4-sphere of radius r in a 5-dimensional chart",
            params: vec![("r", 1.0)],
            components: round_r5,
            domain: hopf_domain(Some((-1.0, 1.0, false, 3))),
        },
        ImmersionEntry {
            name: "graph_hypersurface",
            summary: "polynomial graph over the first three coordinates of a 4-dimensional chart (not CMC)",
            params: vec![("a", 0.3), ("b", 0.2), ("c", 0.1)],
            components: strings(&["u1", "u2", "u3", "a*u1^2 + b*u2*u3 - c*u3^3"]),
            domain: box_domain(3, 0.5, 3),
        },
        ImmersionEntry {
            name: "product_torus",
            summary: "product torus S^1(a) x S^1(b) in C^2 coordinates",
            params: vec![("a", 1.0), ("b", 1.0)],
            components: strings(&["a*cos(u1)", "a*sin(u1)", "b*cos(u2)", "b*sin(u2)"]),
            domain: Domain::new(vec![0.0; 2], vec![TAU; 2], vec![true; 2], vec![4; 2]),
        },
        ImmersionEntry {
            name: "geodesic_sphere_CP2",
            summary: "geodesic sphere of radius r about the origin of CP^2(4 rho), chart radius tan(sqrt(rho) r)/sqrt(rho)",
            params: vec![("r", 0.5), ("rho", 1.0)],
            components: scaled("(tan(sqrt(rho)*r)/sqrt(rho))", &s3),
            domain: hopf_domain(None),
        },
        ImmersionEntry {
            name: "small_hypersphere",
            summary: "small hypersphere of radius rho at height sqrt(1 - rho^2) in S^5 in R^6",
            params: vec![("rho", FRAC_1_SQRT_2)],
            components: small,
            domain: hopf_domain(Some((-1.0, 1.0, false, 3))),
        },
        ImmersionEntry {
            name: "great_hypersphere",
            summary: "totally geodesic equator S^4(1) of S^5 in R^6",
            params: vec![],
            components: great,
            domain: hopf_domain(Some((-1.0, 1.0, false, 3))),
        },
        ImmersionEntry {
            name: "clifford_hypersurface",
            summary: "product S^1(cos theta) x S^3(sin theta) in S^5 in R^6",
            params: vec![("theta", FRAC_PI_4)],
            components: clifford,
            domain: hopf_domain(Some((0.0, TAU, true, 3))),
        },
        ImmersionEntry {
            name: "hyperplane_R5",
            summary: "hyperplane {y1 = offset} in coordinates (x1, x2, y1, y2, t)",
            params: vec![("offset", 0.0)],
            components: strings(&["u1", "u2", "offset", "u3", "u4"]),
            domain: box_domain(4, 0.5, 2),
        },
        ImmersionEntry {
            name: "slice_R5",
            summary: "slice {t = t0} in coordinates (x1, x2, y1, y2, t)",
            params: vec![("t0", 0.0)],
            components: strings(&["u1", "u2", "u3", "u4", "t0"]),
            domain: box_domain(4, 0.5, 2),
        },
        ImmersionEntry {
            name: "graph_surface",
            summary: "non-CMC graph surface in a 5-dimensional chart",
            params: vec![],
            components: strings(&["u1", "u2", "0.4*u1^2 + 0.3*u1*u2 - 0.2*u2^3", "0.1*sin(u1 + u2)", "0.5*u2^2"]),
            domain: box_domain(2, 0.4, 3),
        },
        ImmersionEntry {
            name: "circle",
            summary: "circle of radius r in the (x1, y1) plane of a 4-dimensional chart",
            params: vec![("r", 1.0)],
            components: strings(&["r*cos(u1)", "r*sin(u1)", "0", "0"]),
            domain: Domain::new(vec![0.0], vec![TAU], vec![true], vec![8]),
        },
        ImmersionEntry {
            name: "helix",
            summary: "helix of radius a and pitch b in a 4-dimensional chart",
            params: vec![("a", 1.0), ("b", 0.5)],
            components: strings(&["a*cos(u1)", "a*sin(u1)", "b*u1", "0"]),
            domain: Domain::new(vec![0.0], vec![TAU], vec![false], vec![8]),
        },
    ]
}

pub fn immersion_entry(name: &str) -> Option<ImmersionEntry> {
    immersion_entries().into_iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    #[test]
    fn entries_parse_and_have_matching_domains() {
        let entries = immersion_entries();
        let mut names: Vec<_> = entries.iter().map(|e| e.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), entries.len());
        for e in &entries {
            let vars = e.variables();
            let vars: Vec<&str> = vars.iter().map(String::as_str).collect();
            e.domain.validate(e.dim()).unwrap();
            for c in &e.components {
                let expr = parse_expression(c, &vars).unwrap_or_else(|err| panic!("{}: {c}: {err}", e.name));
                for k in expr.constants() {
                    assert!(k == "pi" || e.params.iter().any(|(p, _)| *p == k), "{}: {k}", e.name);
                }
            }
        }
    }
}
