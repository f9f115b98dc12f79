use std::path::PathBuf;
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"))
}

fn biharm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biharm")).args(args).env("BIHARM_THREADS", "1").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_exits_zero_when_expectations_hold() {
    let path = scenario("small_hypersphere_S5");
    let out = biharm(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("ProperBiharmonic"));
    assert!(text.contains("expectations: all met"));
}

#[test]
fn check_json_is_a_parseable_report() {
    let path = scenario("torus_flat_C2");
    let out = biharm(&["check", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let report = biharm_core::scenario::parse_report(&stdout(&out)).unwrap();
    assert!(report.expectations_met());
}

#[test]
fn check_exits_one_on_expectation_mismatch() {
    let dir = tempdir();
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(scenario("small_hypersphere_S5")).unwrap()).unwrap();
    doc["expect"]["verdict"] = "NotBiharmonic".into();
    let path = dir.join("mismatch.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    let out = biharm(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("expectation failed: verdict expected NotBiharmonic got ProperBiharmonic"));
}

#[test]
fn malformed_config_exits_two_with_a_path() {
    let dir = tempdir();
    let path = dir.join("bad.json");
    std::fs::write(&path, r#"{"schema_version": 1, "ambient": {"catalog": "nowhere"}, "immersion": {"catalog": "circle"}}"#).unwrap();
    let out = biharm(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ambient") && err.contains("nowhere"), "{err}");

    let out = biharm(&["check", dir.join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn catalog_list_names_both_catalogs() {
    let out = biharm(&["catalog", "list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for name in ["ambients:", "immersions:", "CP2", "sasakian_sphere_S5", "geodesic_sphere_CP2", "hyperplane_R5"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn sweep_finds_the_critical_geodesic_sphere() {
    let path = scenario("geodesic_sphere_CP2");
    let out = biharm(&[
        "sweep", path.to_str().unwrap(), "--param", "r", "--range", "0.3:1.2:10", "--objective", "CharacterizationGap", "--format", "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let roots = v["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 1);
    let closed_form = (3.0 / (4.0 + 13f64.sqrt())).sqrt().atan();
    assert!((roots[0]["value"].as_f64().unwrap() - closed_form).abs() <= 1e-8);
}

#[test]
fn sweep_rejects_a_bad_range() {
    let path = scenario("geodesic_sphere_CP2");
    let out = biharm(&["sweep", path.to_str().unwrap(), "--param", "r", "--range", "0.3:1.2", "--objective", "NormalResidual"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn convergence_exit_code_follows_the_order_threshold() {
    let path = scenario("graph_surface_R5");
    let out = biharm(&["convergence", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("minimum observed order"));
    let out = biharm(&["convergence", path.to_str().unwrap(), "--min-order", "5"]);
    assert_eq!(out.status.code(), Some(1));
}

fn tempdir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("biharm-cli-{}-{:?}", std::process::id(), std::thread::current().id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
