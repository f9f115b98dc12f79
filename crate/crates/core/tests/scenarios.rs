use std::f64::consts::FRAC_PI_4;
use std::path::PathBuf;

use biharm_core::biharmonic::Verdict;
use biharm_core::scenario::{
    emit_report, load_scenario, parse_report, run_check, run_check_with, sweep_solve, Objective, ReportFormat, RootKind,
    RunOptions, ScenarioConfig,
};

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> ScenarioConfig {
    let text = std::fs::read_to_string(scenario_dir().join(format!("{name}.json"))).unwrap();
    load_scenario(&text).unwrap()
}

#[test]
fn shipped_scenarios_meet_their_expectations() {
    let mut count = 0;
    for entry in std::fs::read_dir(scenario_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let cfg = load_scenario(&std::fs::read_to_string(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let report = run_check(&cfg);
        assert!(report.expectations_met(), "{}: {:?}", path.display(), report.expectation);
        assert_eq!(report.aggregates.failed_points, 0, "{}", path.display());
        count += 1;
    }
    assert!(count >= 10);
}

#[test]
fn document_output_is_independent_of_thread_count() {
    for name in ["small_hypersphere_S5", "geodesic_sphere_CP2", "graph_surface_R5"] {
        let cfg = load(name);
        let one = emit_report(&run_check_with(&cfg, &RunOptions::with_threads(1)), ReportFormat::Document);
        let three = emit_report(&run_check_with(&cfg, &RunOptions::with_threads(3)), ReportFormat::Document);
        let again = emit_report(&run_check_with(&cfg, &RunOptions::with_threads(1)), ReportFormat::Document);
        assert_eq!(one, three, "{name}");
        assert_eq!(one, again, "{name}");
    }
}

#[test]
fn document_round_trips() {
    let report = run_check(&load("torus_flat_C2"));
    let text = emit_report(&report, ReportFormat::Document);
    let parsed = parse_report(&text).unwrap();
    assert_eq!(emit_report(&parsed, ReportFormat::Document), text);
    let reparsed = parse_report(&emit_report(&parsed, ReportFormat::Document)).unwrap();
    assert_eq!(serde_json::to_string(&parsed.aggregates).unwrap(), serde_json::to_string(&reparsed.aggregates).unwrap());
    assert_eq!(parsed.checks, reparsed.checks);
    assert_eq!(parsed.aggregates.verdict, report.aggregates.verdict);
}

#[test]
fn document_numbers_have_twelve_significant_digits() {
    let report = run_check(&load("small_hypersphere_S5"));
    let text = emit_report(&report, ReportFormat::Document);
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mut stack = vec![&value];
    while let Some(v) = stack.pop() {
        match v {
            serde_json::Value::Number(n) if n.is_f64() => {
                let digits: String = n.to_string().chars().take_while(|c| *c != 'e' && *c != 'E').filter(|c| c.is_ascii_digit()).collect();
                assert!(digits.trim_start_matches('0').len() <= 12, "{n}");
            }
            serde_json::Value::Array(a) => stack.extend(a),
            serde_json::Value::Object(m) => stack.extend(m.values()),
            _ => {}
        }
    }
}

#[test]
fn table_has_one_row_per_check() {
    let cfg = load("small_hypersphere_S5");
    let report = run_check(&cfg);
    let table = emit_report(&report, ReportFormat::Table);
    let lines: Vec<&str> = table.lines().collect();
    let header = lines.iter().position(|l| l.starts_with("check ")).unwrap();
    assert!(lines[header].contains("verdict"));
    let rows: Vec<&&str> = lines[header + 2..].iter().take_while(|l| !l.is_empty()).collect();
    assert_eq!(rows.len(), cfg.checks.len());
    for (row, check) in rows.iter().zip(&cfg.checks) {
        assert!(row.starts_with(&check.label()), "{row}");
    }
    assert!(table.contains("1.00000"), "six significant digits expected:\n{table}");
}

#[test]
fn small_hypersphere_is_proper_biharmonic() {
    let report = run_check(&load("small_hypersphere_S5"));
    let check = report.check("residual_gssf").unwrap();
    assert_eq!(check.verdict, "ProperBiharmonic");
    assert!(check.details["max_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn unit_hypersphere_in_flat_space_has_normal_residual_three() {
    let report = run_check(&load("hypersphere_flat_C2"));
    assert_eq!(report.check("residual_gcsf").unwrap().verdict, "NotBiharmonic");
    for p in &report.points {
        let v = p.values.as_ref().unwrap();
        let active = &v.specialized.as_ref().unwrap().active;
        assert!((active.normal_norm - 3.0).abs() <= 1e-8, "{}", active.normal_norm);
        assert!(active.tangential_norm <= 1e-9);
    }
}

#[test]
fn minimal_immersions_are_biharmonic() {
    for name in ["affine_plane_flat_C2", "great_hypersphere_S5", "slice_cosymplectic_R5"] {
        let report = run_check(&load(name));
        assert_eq!(report.aggregates.verdict, Verdict::MinimalHenceBiharmonic, "{name}");
    }
}

#[test]
fn failing_points_are_recorded_not_fatal() {
    // polar coordinates degenerate on the u1 = 0 row
    let text = serde_json::json!({
        "schema_version": 1,
        "ambient": {"catalog": "flat_C2"},
        "immersion": {"variables": ["s", "t"], "components": ["s*cos(t)", "s*sin(t)", "s^2", "0"]},
        "domain": {"lo": [0, 0], "hi": [1, 3], "samples": [3, 3]},
        "checks": [{"op": "residual_general"}]
    });
    let report = run_check(&load_scenario(&text.to_string()).unwrap());
    assert_eq!(report.points.len(), 9);
    assert_eq!(report.aggregates.failed_points, 3);
    assert!(report.points[..3].iter().all(|p| p.error.is_some() && p.values.is_none()));
    assert!(report.points[3..].iter().all(|p| p.values.is_some()));
    let check = report.check("residual_general").unwrap();
    assert_eq!(check.details["unevaluated_points"], 3);
    assert_eq!(check.verdict, "NotBiharmonic");
}

#[test]
fn flat_hyperspheres_have_no_normal_residual_root() {
    let sweep = sweep_solve(&load("hypersphere_flat_C2"), "r", 0.5, 2.0, 7, Objective::NormalResidual).unwrap();
    assert!(sweep.roots.is_empty());
    assert!(sweep.samples.iter().all(|s| s.objective > 0.0));
    assert!(!sweep.notes.is_empty());
}

#[test]
fn clifford_family_normal_residual_roots() {
    let sweep = sweep_solve(&load("clifford_S5"), "theta", 0.2, 1.3, 12, Objective::NormalResidual).unwrap();
    let proper: Vec<_> = sweep.roots.iter().filter(|r| r.kind == RootKind::Proper).collect();
    assert_eq!(proper.len(), 1);
    assert!((proper[0].value - FRAC_PI_4).abs() <= 1e-9, "{}", proper[0].value);
    assert_eq!(proper[0].verdict, Verdict::ProperBiharmonic);
    // the minimal member S^1(1/2) x S^3(sqrt 3/2) is also a root; |H| and the
    // characterization gap both vanish there, so the objective is flat and the
    // bracket stalls at roundoff
    let minimal: Vec<_> = sweep.roots.iter().filter(|r| r.kind == RootKind::Minimal).collect();
    assert_eq!(minimal.len(), 1);
    assert!((minimal[0].value - std::f64::consts::FRAC_PI_3).abs() <= 1e-7);
}

#[test]
fn sweep_rejects_unknown_parameters_and_bad_ranges() {
    let cfg = load("hypersphere_flat_C2");
    assert!(sweep_solve(&cfg, "zeta", 0.5, 2.0, 5, Objective::NormalResidual).is_err());
    assert!(sweep_solve(&cfg, "r", 2.0, 0.5, 5, Objective::NormalResidual).is_err());
    assert!(sweep_solve(&cfg, "r", 0.5, 2.0, 1, Objective::NormalResidual).is_err());
}
