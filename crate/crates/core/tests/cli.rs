use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn geo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geo"))
        .args(args)
        .env_remove("GEO_THREADS")
        .output()
        .expect("geo runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn flat_axioms_pass() {
    let out = geo(&["axioms", "--model", "flat"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    let checks = report["body"]["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["pass"] == true));
    assert_eq!(report["header"]["tool"], "geo");
}

#[test]
fn sphere_holonomy_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "h.json",
        r#"{"schema": 1, "model": "sphere", "experiment": "holonomy", "h_sequence": [0.04, 0.02, 0.01]}"#,
    );
    let out = geo(&["holonomy", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let body = &json(&out)["body"];
    let order = body["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "holonomy_order")
        .unwrap();
    assert!(order["value"].as_f64().unwrap() >= 2.7);
    assert_eq!(body["settings"]["h_sequence"], serde_json::json!([0.04, 0.02, 0.01]));
}

#[test]
fn sphere_is_not_flat_but_exits_zero() {
    let out = geo(&["flatness", "--model", "sphere"]);
    assert_eq!(out.status.code(), Some(0));
    let body = &json(&out)["body"];
    assert_eq!(body["verdicts"]["flat_by_curvature"], false);
    assert_eq!(body["verdicts"]["flat_by_paths"], false);
    assert_eq!(body["verdicts"]["flat_frame"]["status"], "not_flat");
}

#[test]
fn constant_coefficients_flag_the_discrepancy() {
    let out = geo(&["flatness", "--model", "constant"]);
    assert_eq!(out.status.code(), Some(0));
    let body = &json(&out)["body"];
    assert_eq!(body["verdicts"]["criteria_agree"], false);
    assert!(body["verdicts"]["discrepancy"].is_string());
}

#[test]
fn failed_check_exits_one_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "tight.json",
        r#"{"schema": 1, "model": "sphere", "experiment": "axioms", "tolerances": {"cocycle": 1e-300}}"#,
    );
    let out = geo(&["axioms", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("FAIL cocycle"), "{stderr}");
    let failed: Vec<_> = json(&out)["body"]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .cloned()
        .collect();
    assert!(failed.iter().all(|c| c["param_point"].is_array()));
}

#[test]
fn invalid_config_exits_two_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        "{\n  \"schema\": 1,\n  \"model\": \"sphere\",\n  \"h_sequence\": [0.01, 0.02, 0.03]\n}\n",
    );
    let out = geo(&["holonomy", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 4"), "{stderr}");

    let cfg = write_config(dir.path(), "syntax.json", "{\n  \"schema\": 1,\n  \"steps\": ,\n}\n");
    let out = geo(&["axioms", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    assert_eq!(geo(&["axioms", "--config", "/nonexistent/geo.json"]).status.code(), Some(2));
    assert_eq!(geo(&["axioms", "--model", "torus"]).status.code(), Some(2));
    assert_eq!(geo(&["axioms", "--steps", "0"]).status.code(), Some(2));
}

#[test]
fn point_outside_chart_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "pole.json",
        r#"{"schema": 1, "model": "sphere", "experiment": "holonomy", "point": [0.05, 1.0]}"#,
    );
    let out = geo(&["holonomy", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_thread_count_exits_two() {
    let out = Command::new(env!("CARGO_BIN_EXE_geo"))
        .args(["axioms"])
        .env("GEO_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_report_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let out = geo(&["torsion", "--model", "torsion_plane{0.5}", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("experiment,check,model,param_point,h,value,tolerance,pass"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("torsion,torsion_consistency,torsion_plane{0.5},"), "{row}");
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"schema": 1, "model": "flat", "steps": 100, "seed": 1}"#);
    let out = geo(&["axioms", "--config", &cfg, "--model", "sphere", "--steps", "500", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let settings = &json(&out)["body"]["settings"];
    assert_eq!(settings["model"], "sphere");
    assert_eq!(settings["steps"], 500);
    assert_eq!(settings["seed"], 4);
}

#[test]
fn same_seed_same_body() {
    let a = geo(&["bianchi", "--model", "sphere", "--seed", "11"]);
    let b = geo(&["bianchi", "--model", "sphere", "--seed", "11"]);
    let c = geo(&["bianchi", "--model", "sphere", "--seed", "12"]);
    let body = |o: &Output| serde_json::to_string(&json(o)["body"]).unwrap();
    assert_eq!(body(&a), body(&b));
    assert_ne!(body(&a), body(&c));
}

#[test]
fn shipped_configs_pass() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let experiment = serde_json::from_str::<Value>(&text).unwrap()["experiment"]
            .as_str()
            .unwrap()
            .to_string();
        let out = geo(&[&experiment, "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
        seen += 1;
    }
    assert!(seen >= 5);
}
