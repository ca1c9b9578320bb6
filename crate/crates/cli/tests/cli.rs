use std::path::{Path, PathBuf};
use std::process::Command;

use eqvi_cli::output::fmt_f64;
use proptest::prelude::*;

fn instance(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../instances")
        .join(name)
}

fn eqvi(args: &[&str], out: &Path) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_eqvi"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("EQVI_THREADS", "0")
        .output()
        .unwrap();
    (
        o.status.code().unwrap(),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn demo_solves_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = instance("demo-a.json");
    let (code, out, _) = eqvi(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code, 0, "{out}");
    let rep = json(&dir.path().join("report.json"));
    assert_eq!(rep["converged"], true);
    assert_eq!(rep["audit_passed"], true);
    let csv = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,x,value"));
    assert_eq!(csv.lines().count(), 1 + 8 * 10);
    assert!(dir.path().join("xi.csv").exists());
}

#[test]
fn forced_refusal_flags_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = instance("refuse.json");
    let (code, _, err) = eqvi(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code, 3);
    assert!(err.contains("c_F > c_G * ||gamma||^p"), "{err}");
    let (_, _, _) = eqvi(
        &["solve", "--force", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    let rep = json(&dir.path().join("report.json"));
    assert_eq!(rep["smallness"], "violated");
    assert_eq!(rep["audit_passed"], serde_json::Value::Null);
}

#[test]
fn malformed_config_exits_one_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(instance("demo-a.json"))
        .unwrap()
        .replace("\"nt\": 8", "\"nt\": -8");
    std::fs::write(&bad, text).unwrap();
    let (code, _, err) = eqvi(&["solve", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(code, 1);
    assert!(err.contains("line 6"), "{err}");
    let (code, _, err) = eqvi(&["certify"], dir.path());
    assert_eq!(code, 1);
    assert!(err.contains("--config"));
}

#[test]
fn monotone_probe_has_one_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = instance("monotone.json");
    let (code, _, _) = eqvi(
        &["probe", "--config", cfg.to_str().unwrap(), "--starts", "3"],
        dir.path(),
    );
    assert_eq!(code, 0);
    let c = json(&dir.path().join("clusters.json"));
    assert_eq!(c["n_clusters"], 1);
    assert_eq!(c["probe"]["runs"], 12);
}

#[test]
fn branch_probe_finds_three_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = instance("branches.json");
    let (code, _, _) = eqvi(&["probe", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code, 0);
    assert_eq!(json(&dir.path().join("clusters.json"))["n_clusters"], 3);
}

#[test]
fn oracle_check_passes_on_toys() {
    let dir = tempfile::tempdir().unwrap();
    let toys = instance("toy");
    let (code, out, _) = eqvi(
        &["oracle-check", "--config", toys.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("27 of 27 checks passed"), "{out}");
}

#[test]
fn strict_mode_writes_hypothesis_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = instance("demo-a.json");
    let (code, _, _) = eqvi(
        &["certify", "--strict", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(code, 0);
    assert_eq!(json(&dir.path().join("hypotheses.json"))["passed"], true);
    let cert = json(&dir.path().join("certificate.json"));
    assert!(!cert["certificate"]["trace"].as_array().unwrap().is_empty());
}

#[test]
fn understated_coercivity_fails_strict_load() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(instance("demo-a.json"))
        .unwrap()
        .replace(
            "\"gamma\": {",
            "\"constants\": {\"c_f\": 5.0},\n  \"gamma\": {",
        );
    std::fs::write(&bad, text).unwrap();
    let (code, _, err) = eqvi(
        &["certify", "--strict", "--config", bad.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(code, 1);
    assert!(err.contains("H(F)"), "{err}");
}

proptest! {
    #[test]
    fn csv_floats_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }
}

#[test]
fn demo_certificate_matches_golden_trace() {
    let loaded = eqvi_cli::config::load_config(&instance("demo-a.json")).unwrap();
    let (_, cert) = loaded.instance.certify().unwrap();
    let golden = json(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/demo-a-certificate.json"));
    let now = serde_json::to_value(&cert).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0);
    for (k, v) in golden["values"].as_object().unwrap() {
        let got = now[k].as_f64().unwrap();
        assert!(close(got, v.as_f64().unwrap()), "{k}: {got} vs {v}");
    }
    let trace = golden["trace"].as_array().unwrap();
    assert_eq!(trace.len(), cert.trace.len());
    for (g, t) in trace.iter().zip(&cert.trace) {
        assert_eq!(g["name"], t.name.as_str());
        assert!(close(t.value, g["value"].as_f64().unwrap()), "{}: {} vs {}", t.name, t.value, g["value"]);
    }
}
