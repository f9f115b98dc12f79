//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL line
//! with its measured quantities and wall time; the process fails if any does.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use biharm_core::ambient::{catalog, catalog_entries, AmbientKind, AmbientModel, AmbientState};
use biharm_core::biharmonic::{
    contact_trace_from_operators, point_data, r2_trace, r2_trace_from_operators, Verdict,
};
use biharm_core::oracle::DEFAULT_STEPS;
use biharm_core::scenario::run::ORACLE_MIN_ORDER;
use biharm_core::scenario::{
    convergence_report, immersion_entries, load_scenario, run_check, sweep_solve, CheckKind, CheckSpec, Objective,
    Report, RootKind, ScenarioConfig,
};
use biharm_core::structure::{decompose, operator_norm, verify_relations, Frames};

type Outcome = Result<String, String>;

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> ScenarioConfig {
    let text = std::fs::read_to_string(scenario_dir().join(format!("{name}.json"))).unwrap();
    load_scenario(&text).unwrap()
}

fn shipped() -> Vec<ScenarioConfig> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_scenario(&std::fs::read_to_string(p).unwrap()).unwrap()).collect()
}

fn with_checks(cfg: &ScenarioConfig, kinds: Vec<CheckKind>) -> ScenarioConfig {
    let mut out = cfg.clone();
    out.checks = kinds.into_iter().map(|kind| CheckSpec { label: None, kind }).collect();
    out.expect.clear();
    out
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_state(space: &AmbientModel, rng: &mut ChaCha8Rng) -> AmbientState {
    let x: Vec<f64> = if space.is_embedded() {
        let p: Vec<f64> = (0..space.dim).map(|_| rng.gen_range(0.2..1.2)).collect();
        space.chart_point(&p).unwrap().iter().copied().collect()
    } else {
        (0..space.dim).map(|_| rng.gen_range(-0.5..0.5)).collect()
    };
    space.state(&x).unwrap()
}

/// Orthonormal frames for a random tangent subspace of random dimension.
fn random_frames(space: &AmbientModel, st: &AmbientState, rng: &mut ChaCha8Rng) -> Frames {
    let basis = st.tangent_basis();
    let m = rng.gen_range(1..space.dim);
    let tangents: Vec<DVector<f64>> = (0..m)
        .map(|_| basis.iter().fold(DVector::zeros(st.ncoords()), |acc, e| acc + e * rng.gen_range(-1.0..1.0)))
        .collect();
    Frames::from_tangents(st, &tangents, space.dim, 1e-8).unwrap()
}

fn structured_ambients(kind: AmbientKind) -> Vec<AmbientModel> {
    catalog_entries()
        .into_iter()
        .map(|e| catalog(e.name, &BTreeMap::new()).unwrap())
        .filter(|a| a.kind == kind)
        .collect()
}

fn structure_relations() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for kind in [AmbientKind::GeneralizedComplex, AmbientKind::GeneralizedSasakian] {
        for space in structured_ambients(kind) {
            for _ in 0..100 {
                let st = random_state(&space, &mut rng);
                let frames = random_frames(&space, &st, &mut rng);
                let ops = decompose(&st, &frames).map_err(|e| format!("{}: {e}", space.name))?;
                for (name, r) in verify_relations(&ops) {
                    ensure(r <= 1e-10, || format!("{} {name}: {r:e}", space.name))?;
                    worst = worst.max(r);
                }
                count += 1;
            }
        }
    }
    Ok(format!("{count} frames, worst relation residual {worst:.2e}"))
}

fn xi_tangent_hyperplane_blocks() -> Outcome {
    let cfg = load("hyperplane_sasakian_R5");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d = &cfg.immersion.domain;
    let (mut worst_pt, mut worst_nt): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let u: Vec<f64> = d.lo.iter().zip(&d.hi).map(|(l, h)| rng.gen_range(*l..*h)).collect();
        let pd = point_data(&cfg.ambient, &cfg.immersion, &u, 1e-8).map_err(|e| e.to_string())?;
        ensure(pd.flags.xi_tangent.holds(), || format!("xi not tangent at {u:?}"))?;
        let ops = &pd.operators;
        let pt = &ops.tangent_tangent * &ops.normal_tangent;
        let nt = &ops.tangent_normal * &ops.normal_tangent + nalgebra::DMatrix::identity(1, 1);
        worst_pt = worst_pt.max(operator_norm(&pt));
        worst_nt = worst_nt.max(operator_norm(&nt));
    }
    ensure(worst_pt <= 1e-9 && worst_nt <= 1e-9, || format!("|Pt| {worst_pt:e}, |Nt + Id| {worst_nt:e}"))?;
    Ok(format!("50 points, |Pt| {worst_pt:.2e}, |Nt + Id| {worst_nt:.2e}"))
}

fn trace_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut complex, mut contact): (f64, f64) = (0.0, 0.0);
    for kind in [AmbientKind::GeneralizedComplex, AmbientKind::GeneralizedSasakian] {
        for space in structured_ambients(kind) {
            for _ in 0..50 {
                let st = random_state(&space, &mut rng);
                let frames = random_frames(&space, &st, &mut rng);
                let ops = decompose(&st, &frames).map_err(|e| e.to_string())?;
                let coords = DVector::from_fn(frames.normal.len(), |_, _| rng.gen_range(-2.0..2.0));
                let h = frames.normal_vector(&coords);
                match kind {
                    AmbientKind::GeneralizedComplex => {
                        let direct = r2_trace(&st, &frames, &h);
                        let via_ops = r2_trace_from_operators(&ops, &frames, &coords);
                        complex = complex.max((direct - via_ops).norm());
                    }
                    AmbientKind::GeneralizedSasakian => {
                        let direct = frames.tangent.iter().fold(DVector::zeros(st.ncoords()), |acc, x| acc + st.curvature(x, &h, x));
                        let via_ops = contact_trace_from_operators(&st, &ops, &frames, &h);
                        contact = contact.max((direct - via_ops).norm());
                    }
                }
            }
        }
    }
    ensure(complex <= 1e-10 && contact <= 1e-10, || format!("complex {complex:e}, contact {contact:e}"))?;
    Ok(format!("complex trace gap {complex:.2e}, contact trace gap {contact:.2e}"))
}

fn residual_max(report: &Report) -> f64 {
    report.aggregates.max_residual_general.max(report.aggregates.max_residual_specialized)
}

fn proper_reproductions() -> Outcome {
    let mut parts = Vec::new();
    for name in ["small_hypersphere_S5", "clifford_S5"] {
        let report = run_check(&load(name));
        let a = &report.aggregates;
        let res = residual_max(&report);
        ensure(a.failed_points == 0 && res <= 1e-6 && a.min_h > 0.1, || {
            format!("{name}: residual {res:e}, min |H| {}, failed {}", a.min_h, a.failed_points)
        })?;
        ensure(a.verdict == Verdict::ProperBiharmonic, || format!("{name}: {:?}", a.verdict))?;
        parts.push(format!("{name} residual {res:.1e}"));
    }
    let closed_form = (3.0 / (4.0 + 13f64.sqrt())).sqrt().atan();
    let sweep = sweep_solve(&load("geodesic_sphere_CP2"), "r", 0.3, 1.2, 10, Objective::CharacterizationGap)
        .map_err(|e| e.to_string())?;
    let proper: Vec<_> = sweep.roots.iter().filter(|r| r.kind == RootKind::Proper).collect();
    ensure(proper.len() == 1, || format!("expected one proper root, got {:?}", sweep.roots))?;
    let root = proper[0];
    let gap = (root.value - closed_form).abs();
    ensure(gap <= 1e-8 && root.max_residual <= 1e-6 && root.max_h > 0.1, || {
        format!("CP2 root {} vs {closed_form}, residual {:e}", root.value, root.max_residual)
    })?;
    parts.push(format!("CP2 root {:.10} (closed form gap {gap:.1e})", root.value));
    Ok(parts.join("; "))
}

fn nonexistence_audits() -> Outcome {
    let flat = load("hypersphere_flat_C2");
    let mut worst: f64 = 0.0;
    for r in [0.5, 0.8, 1.0, 1.7, 2.5] {
        let report = run_check(&flat.with_constant("r", r).unwrap());
        for p in &report.points {
            let v = p.values.as_ref().ok_or_else(|| format!("r = {r}: point {:?} failed", p.u))?;
            let expected = 3.0 / r.powi(3);
            for got in [v.general.normal_norm, v.specialized.as_ref().unwrap().active.normal_norm] {
                worst = worst.max((got - expected).abs() / expected);
            }
        }
    }
    ensure(worst <= 1e-8, || format!("flat normal residual relative error {worst:e}"))?;

    let space = catalog("sasakian_R5", &BTreeMap::new()).unwrap();
    let mut audited = 0;
    for entry in immersion_entries() {
        if entry.components.len() != space.ncoords() || entry.dim() != space.dim - 1 {
            continue;
        }
        let doc = serde_json::json!({
            "schema_version": 1,
            "ambient": {"catalog": "sasakian_R5"},
            "immersion": {"catalog": entry.name},
            "checks": [{"op": "nonexistence_audit"}],
        });
        let Ok(cfg) = load_scenario(&doc.to_string()) else { continue };
        let report = run_check(&cfg);
        let audit = report.check("nonexistence_audit").unwrap();
        let applies = audit.details["applying"].as_array().is_some_and(|a| !a.is_empty());
        ensure(audit.verdict != "Contradiction", || format!("{}: audit contradicted", entry.name))?;
        if applies {
            ensure(report.aggregates.verdict != Verdict::ProperBiharmonic, || format!("{} is proper", entry.name))?;
            audited += 1;
        }
    }
    ensure(audited > 0, || "the audit applied to no Sasakian R^5 hypersurface".into())?;
    Ok(format!("flat relative error {worst:.1e}; audit applied to {audited} Sasakian R^5 hypersurface(s), none proper"))
}

fn characterization_equivalences() -> Outcome {
    let cfg = with_checks(&load("geodesic_sphere_CP2"), vec![]);
    let critical = (3.0 / (4.0 + 13f64.sqrt())).sqrt().atan();
    let mut radii: Vec<f64> = (0..49).map(|i| 0.25 + 1.1 * i as f64 / 48.0).collect();
    radii.push(critical);
    let mut biharmonic = 0;
    for r in &radii {
        let report = run_check(&cfg.with_constant("r", *r).unwrap());
        let a = &report.aggregates;
        let residual_zero = residual_max(&report) <= 1e-6;
        let gap = (a.max_b_norm_sq - 6.0).abs().max((a.min_b_norm_sq - 6.0).abs());
        ensure(residual_zero == (gap <= 1e-5), || format!("r = {r}: residual {:e}, gap {gap:e}", residual_max(&report)))?;
        biharmonic += residual_zero as usize;
    }
    ensure(biharmonic == 1, || format!("{biharmonic} biharmonic radii, expected 1"))?;

    let spheres = load("small_hypersphere_S5");
    let report = run_check(&with_checks(&spheres, vec![]));
    for p in &report.points {
        let s = &p.values.as_ref().unwrap().sample;
        let k = s.k_value().unwrap();
        ensure((k - 4.0).abs() <= 1e-12, || format!("threshold {k}"))?;
    }
    let sweep = sweep_solve(&spheres, "rho", 0.4, 0.95, 8, Objective::CharacterizationGap).map_err(|e| e.to_string())?;
    let roots: Vec<f64> = sweep.roots.iter().map(|r| r.value).collect();
    ensure(roots.len() == 1 && (roots[0] - 0.5f64.sqrt()).abs() <= 1e-8, || format!("S^5 roots {roots:?}"))?;
    Ok(format!("50 CP2 radii agree, one biharmonic; S^5 threshold 4 crossed at rho {:.10}", roots[0]))
}

fn bound_equality() -> Outcome {
    let report = run_check(&load("small_hypersphere_S5"));
    let bound = report.check("bound_check").unwrap();
    let b = &bound.details["bound"];
    let (limit, measured) = (b["bound"].as_f64().unwrap(), b["measured_h_sq"].as_f64().unwrap());
    ensure(bound.verdict == "Equality" && (limit - 1.0).abs() <= 1e-9 && (measured - 1.0).abs() <= 1e-9, || {
        format!("{}: bound {limit}, |H|^2 {measured}", bound.verdict)
    })?;
    let case = &b["equality_case"];
    ensure(case["pseudo_umbilical"] == true && case["parallel_h"] == true, || format!("equality case {case}"))?;
    ensure(report.check("pseudo_umbilical").unwrap().verdict == "PseudoUmbilical", || "not pseudo-umbilical".into())?;

    let perturbed = run_check(&load("small_hypersphere_S5").with_constant("rho", 0.65).unwrap());
    let pb = perturbed.check("bound_check").unwrap();
    ensure(pb.verdict != "Equality" && perturbed.aggregates.verdict != Verdict::ProperBiharmonic, || {
        format!("rho 0.65: bound {}, verdict {:?}", pb.verdict, perturbed.aggregates.verdict)
    })?;
    Ok(format!("|H|^2 = K/4 = {measured}; rho 0.65 gives {} and {:?}", pb.verdict, perturbed.aggregates.verdict))
}

fn gauss_cross_check() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for cfg in shipped() {
        let report = run_check(&with_checks(&cfg, vec![CheckKind::Gauss { tol: None }]));
        let gauss = report.check("gauss").unwrap();
        if gauss.details["certified_ambient"] == true {
            let gap = gauss.details["max_gap"].as_f64().unwrap();
            ensure(gauss.verdict == "Agree", || format!("{}: {} gap {gap:e}", cfg.name, gauss.verdict))?;
            worst = worst.max(gap);
            compared += 1;
        }
    }
    let report = run_check(&with_checks(&load("hypersphere_synthetic_N"), vec![CheckKind::Gauss { tol: None }]));
    let identity = report.check("gauss").unwrap().details["identity_gap"].as_f64().unwrap();
    ensure(identity <= 1e-8, || format!("synthetic identity gap {identity:e}"))?;
    Ok(format!("{compared} scenarios, worst intrinsic gap {worst:.1e}; synthetic identity gap {identity:.1e}"))
}

fn specialization_coherence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for cfg in shipped() {
        let report = run_check(&with_checks(&cfg, vec![CheckKind::Specialization { tol: None }]));
        let check = report.check("specialization").unwrap();
        let gap = check.details["max_gap"].as_f64().unwrap_or(f64::NAN);
        ensure(check.verdict == "Coherent" && gap <= 1e-8, || format!("{}: {} gap {gap:e}", cfg.name, check.verdict))?;
        worst = worst.max(gap);
        count += 1;
    }
    Ok(format!("{count} scenarios, worst gap {worst:.1e}"))
}

fn finite_difference_oracle() -> Outcome {
    let cfg = load("graph_surface_R5");
    let report = run_check(&with_checks(&cfg, vec![]));
    ensure(!report.aggregates.cmc.is_cmc, || "test surface is CMC".into())?;
    let conv = convergence_report(&cfg, &DEFAULT_STEPS);
    let order = conv.min_order.unwrap_or(f64::NAN);
    ensure(conv.applicable && conv.failed_points == 0 && order >= ORACLE_MIN_ORDER, || {
        format!("applicable {}, failed {}, order {order}", conv.applicable, conv.failed_points)
    })?;
    Ok(format!("{} points, minimum observed order {order:.3}", conv.points.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("structure relations", Duration::from_secs(5), structure_relations),
        ("xi-tangent hyperplane blocks", Duration::from_secs(5), xi_tangent_hyperplane_blocks),
        ("trace identities", Duration::from_secs(5), trace_identities),
        ("proper biharmonic reproductions", Duration::from_secs(60), proper_reproductions),
        ("non-existence audits", Duration::from_secs(30), nonexistence_audits),
        ("characterization equivalences", Duration::from_secs(60), characterization_equivalences),
        ("bound equality case", Duration::from_secs(30), bound_equality),
        ("Gauss equation cross-check", Duration::from_secs(30), gauss_cross_check),
        ("specialization coherence", Duration::from_secs(30), specialization_coherence),
        ("jet vs finite-difference oracle", Duration::from_secs(60), finite_difference_oracle),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if status == "FAIL" {
            failed += 1;
        }
        // runtime budgets assume an optimized build; debug runs only report them
        let slow = if elapsed > *budget { format!(" (over {}s budget)", budget.as_secs()) } else { String::new() };
        println!("criterion {:>2} {status} {name}: {detail} [{:.2}s{slow}]", i + 1, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
