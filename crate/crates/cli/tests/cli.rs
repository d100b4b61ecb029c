use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn probcon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_probcon")).args(args).output().unwrap()
}

fn json_out(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn gaussian_margin_example() {
    let v = json_out(&probcon(&[
        "invert", "gaussian", "--mu", "-2,0", "--sigma-diag", "1,1", "--a", "1,0", "--b", "0", "--eta", "0.95",
    ]));
    assert!((v["margin"].as_f64().unwrap() - 0.3551464).abs() < 1e-6);
    assert_eq!(v["member"], true);
    assert!((v["prob"].as_f64().unwrap() - 0.9772499).abs() < 1e-6);
}

#[test]
fn full_covariance_matches_diagonal() {
    let diag = json_out(&probcon(&["invert", "gaussian", "--mu", "1,2", "--sigma-diag", "2,3", "--a", "1,1", "--b", "4"]));
    let full = json_out(&probcon(&["invert", "gaussian", "--mu", "1,2", "--sigma", "2,0;0,3", "--a", "1,1", "--b", "4"]));
    assert!((diag["prob"].as_f64().unwrap() - full["prob"].as_f64().unwrap()).abs() < 1e-14);
}

#[test]
fn uniform_dirichlet_half() {
    for method in ["exact", "edgeworth1", "edgeworth2"] {
        let v = json_out(&probcon(&["invert", "dirichlet", "--alpha", "1,1", "--a", "1,0", "--b", "0.5", "--method", method]));
        assert!((v["prob"].as_f64().unwrap() - 0.5).abs() < 1e-9, "{method}: {v}");
    }
}

#[test]
fn monte_carlo_reports_std_err() {
    let v = json_out(&probcon(&[
        "invert", "dirichlet", "--alpha", "2,1", "--a", "1,0", "--b", "0.5", "--method", "mc", "--samples", "20000",
    ]));
    let (p, se) = (v["prob"].as_f64().unwrap(), v["std_err"].as_f64().unwrap());
    assert!((p - 0.25).abs() <= 4.0 * se, "{v}");
}

#[test]
fn invert_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.json", r#"{"alpha":[2,1],"a":[1,0],"b":0.5,"eta":0.2}"#);
    let v = json_out(&probcon(&["--config", &cfg, "--method", "exact", "invert", "dirichlet"]));
    assert!((v["prob"].as_f64().unwrap() - 0.25).abs() < 1e-6);
    assert!((v["margin"].as_f64().unwrap() - 0.05).abs() < 1e-6);
    assert_eq!(v["member"], true);
}

#[test]
fn estimate_map_and_hard() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.json", r#"{"counts":[2,8]}"#);
    let cons = write(dir.path(), "c.json", r#"[{"a":[1,-1],"b":0,"eta":0.95}]"#);
    let map = json_out(&probcon(&[
        "estimate", "--model", "multinomial", "--estimator", "map", "--data", &data, "--constraints", &cons,
    ]));
    let theta: Vec<f64> = serde_json::from_value(map["theta"].clone()).unwrap();
    assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-12 && theta[0] < theta[1]);
    assert!(map["feasibility"][0].as_f64().unwrap() >= -1e-9);
    let hard = json_out(&probcon(&[
        "estimate", "--model", "multinomial", "--estimator", "hard", "--data", &data, "--constraints", &cons,
    ]));
    assert!((hard["theta"][0].as_f64().unwrap() - 0.2).abs() < 1e-9);
}

#[test]
fn estimate_regression_with_fixed_ridge() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "r.json", r#"{"x":[[1,0],[0,1],[1,1]],"y":[1,2,3]}"#);
    let v = json_out(&probcon(&["estimate", "--model", "regression", "--estimator", "mle", "--data", &data, "--ridge", "0"]));
    assert_eq!(v["ridge"], 0.0);
    assert!(v["theta"].as_array().unwrap().len() == 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // usage errors and invalid input
    assert_eq!(probcon(&["bogus"]).status.code(), Some(1));
    assert_eq!(probcon(&["invert", "dirichlet", "--alpha", "1,1", "--a", "1", "--b", "0.5"]).status.code(), Some(1));
    assert_eq!(
        probcon(&["invert", "gaussian", "--mu", "0,0", "--sigma", "1,2;2,1", "--a", "1,0", "--b", "0"]).status.code(),
        Some(1)
    );
    assert_eq!(probcon(&["--method", "mc", "experiment", "--builtin", "multinomial"]).status.code(), Some(1));
    // infeasible constraints
    let data = write(dir.path(), "d.json", r#"{"counts":[9,1]}"#);
    let cons = write(
        dir.path(),
        "c.json",
        r#"[{"a":[1,-1],"b":-0.5,"eta":0.95},{"a":[-1,1],"b":-0.6,"eta":0.95}]"#,
    );
    let out = probcon(&["estimate", "--model", "multinomial", "--estimator", "map", "--data", &data, "--constraints", &cons]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("probcon: infeasible"));
    // numerical failure
    let data = write(dir.path(), "r.json", r#"{"x":[[1,2],[2,4],[3,6]],"y":[1,2,3]}"#);
    let out = probcon(&["estimate", "--model", "regression", "--estimator", "mle", "--data", &data, "--ridge", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(probcon(&["--help"]).status.code(), Some(0));
}

#[test]
fn experiment_csv_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_probcon"))
        .args(["experiment", "--builtin", "gaussian", "--replicates", "2", "--train-sizes", "10", "--seed", "3", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(probcon::harness::CSV_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty() && !text.contains('\r'));
    assert!(rows.iter().all(|r| r.starts_with("gaussian_means,") && r.split(',').count() == 8));
}

#[test]
fn experiment_from_spec_file_respects_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let spec = probcon(&["experiment", "--builtin", "multinomial", "--print-spec"]);
    assert!(spec.status.success());
    let mut v: Value = serde_json::from_slice(&spec.stdout).unwrap();
    v["n_replicates"] = 1.into();
    v["train_sizes"] = serde_json::json!([10]);
    v["estimators"] = serde_json::json!(["mle", "hard"]);
    let cfg = write(dir.path(), "spec.json", &v.to_string());
    let run = |seed: &str| probcon(&["--config", &cfg, "--seed", seed, "experiment"]).stdout;
    assert_eq!(run("5"), run("5"));
    assert_ne!(run("5"), run("6"));
}
