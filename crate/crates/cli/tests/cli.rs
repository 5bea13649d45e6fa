use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exhaust")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn limits_table_and_json() {
    let table = stdout(&["limits", "--law", "const:2", "--format", "csv"]);
    assert!(table.contains("theta") && table.contains("1.5936"));
    let v: serde_json::Value = serde_json::from_str(&stdout(&["limits", "--law", "ptail:1:0.5"])).unwrap();
    assert_eq!(v["theta_infinite"], true);
}

#[test]
fn exact_csv_sums_to_one() {
    let csv = stdout(&["exact", "--law", "pmf:0:0.3,2:0.7", "--n", "6", "--format", "csv"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("informed,tau,prob"));
    let total: f64 = lines.map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn simulate_is_seeded() {
    let args = ["simulate", "--engine", "gw", "--law", "poisson:2", "--n", "300", "--reps", "50", "--seed", "9", "--format", "csv"];
    let a = stdout(&args);
    assert_eq!(a, stdout(&[&args[..], &["--workers", "3"]].concat()));
    assert_eq!(a.lines().count(), 51);
    let trace = stdout(&["simulate", "--law", "const:2", "--n", "100", "--trace", "--format", "csv"]);
    assert!(trace.starts_with("t,informed,capital,revealed\n"));
}

#[test]
fn rate_point_and_surface() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&["rate", "--law", "const:2", "--r", "0.5", "--t", "1"])).unwrap();
    assert!(v["F"].as_f64().unwrap() > 0.0);
    let surface = stdout(&["rate", "--law", "const:2", "--surface", "--points", "5", "--format", "csv"]);
    assert_eq!(surface.lines().count(), 26);
    assert!(surface.contains(",inf"));
}

#[test]
fn decay_for_bernoulli() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&["decay", "--law", "bernoulli:0.6"])).unwrap();
    assert!((v["decay_rate"].as_f64().unwrap() - (1.0 - 0.6f64.ln())).abs() < 1e-9);
}

#[test]
fn experiment_writes_report_and_sets_exit_code() {
    let dir = std::env::temp_dir().join(format!("exhaust-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("coupling.json");
    let out = run(&["experiment", "coupling", "--law", "pmf:0:0.3,2:0.7", "--n", "8", "--reps", "20000", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["id"], "coupling");
    assert_eq!(report["params"]["reps"], 20000);
    // A KS distance below 0.02 is out of reach with 40 samples.
    let bad = run(&["experiment", "clt", "--law", "const:2", "--n", "50", "--reps", "40"]);
    assert_eq!(bad.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bad_input_is_reported() {
    let out = run(&["limits", "--law", "poisson:-2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert_eq!(run(&["exact", "--law", "poisson:1", "--n", "4"]).status.code(), Some(2));
}
