use std::fs;
use std::path::Path;
use std::process::Command;

fn run(cmd: &str, config: &str, dir: &Path, extra: &[&str], env: &[(&str, &str)]) -> i32 {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    let mut c = Command::new(env!("CARGO_BIN_EXE_localiser-lab"));
    c.arg(cmd).arg("--config").arg(&cfg).arg("--out").arg(dir.join("out")).args(extra);
    c.env_remove("LOCALISER_LAB_THREADS");
    for (k, v) in env {
        c.env(k, v);
    }
    let out = c.output().unwrap();
    out.status.code().unwrap()
}

fn csv(dir: &Path) -> String {
    fs::read_to_string(dir.join("out/report.csv")).unwrap()
}

#[test]
fn index_run_matches_oracle_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let code = run("index", r#"{"schema_version": 1}"#, dir.path(), &[], &[]);
    assert_eq!(code, 0);
    let text = csv(dir.path());
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("index"), col("oracle_index"));
    assert_eq!(col("match"), "true");
    assert_eq!(col("dim"), "802");
    let certs: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/certificates.json")).unwrap()).unwrap();
    assert_eq!(certs["pass"], true);
}

#[test]
fn invalid_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("index", r#"{"model": {}}"#, dir.path(), &[], &[]), 2);
    assert_eq!(run("index", "not json", dir.path(), &[], &[]), 2);
    let weights = r#"{"schema_version": 1, "model": {"weights": [1.0, -1.0], "windings": [1, 1]}}"#;
    assert_eq!(run("semifinite", weights, dir.path(), &[], &[]), 2);
}

#[test]
fn bounds_on_small_grid_all_pass() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"schema_version": 1, "model": {"windings": [1]}, "params": {"t_grid": [1.0, 10.0, 100.0]}}"#;
    assert_eq!(run("bounds", config, dir.path(), &[], &[]), 0);
    let text = csv(dir.path());
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn sweep_output_is_deterministic_across_pool_sizes() {
    let config = r#"{"schema_version": 1, "model": {"n_max": 96, "windings": [1, -2]},
                     "params": {"kappa_grid": [0.005, 0.05, 0.5], "lambda_grid": [10.5, 40.5, 80.5]}}"#;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run("sweep", config, a.path(), &["--threads", "1"], &[]), 0);
    assert_eq!(run("sweep", config, b.path(), &[], &[("LOCALISER_LAB_THREADS", "4")]), 0);
    assert_eq!(csv(a.path()), csv(b.path()));
    assert_eq!(csv(a.path()).lines().count(), 1 + 2 * 9);
}

#[test]
fn semifinite_and_asymptotic_runs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("semifinite", r#"{"schema_version": 1}"#, dir.path(), &[], &[]), 0);
    assert!(csv(dir.path()).contains("tau_index"));
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("asymptotic", r#"{"schema_version": 1}"#, dir.path(), &[], &[]), 0);
    assert_eq!(csv(dir.path()).lines().count(), 4);
}

#[test]
fn snapped_lambda_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"schema_version": 1, "model": {"n_max": 64}, "params": {"t": 4.0, "lambda": 40.0}}"#;
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_localiser-lab"))
        .args(["index", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("snapped to 40.5"));
    assert!(csv(dir.path()).contains("4.0000000000000000e1"));
}
