//! One line per acceptance criterion, each at its stated tolerance.
//! Criteria 1 and 2 go through the `exhaust` binary; the rest call the
//! suite in `exhaust_core::harness::verify` with the default seed.

use std::process::Command;
use std::time::Instant;

use exhaust_core::harness::verify::{self, CriterionResult};
use exhaust_core::harness::RunOptions;

fn exhaust(args: &[&str]) -> serde_json::Value {
    let out = Command::new(env!("CARGO_BIN_EXE_exhaust")).args(args).output().expect("binary runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn via_binary(id: u32, title: &'static str, f: impl FnOnce() -> (bool, String), budget_s: f64) -> CriterionResult {
    let start = Instant::now();
    let (pass, detail) = f();
    let seconds = start.elapsed().as_secs_f64();
    CriterionResult { id, title, pass: pass && seconds < budget_s, detail, seconds }
}

#[test]
fn acceptance() {
    let mut results = Vec::new();
    results.push(via_binary(
        1,
        "limit constants (cli)",
        || {
            let v = exhaust(&["limits", "--law", "poisson:1.4998"]);
            let (t, p) = (v["theta"].as_f64().unwrap(), v["p"].as_f64().unwrap());
            ((t - 0.8740).abs() < 5e-4 && (p - 0.5827).abs() < 5e-4, format!("theta = {t:.6}; p = {p:.6}"))
        },
        1.0,
    ));
    println!("{}", results[0].line());
    results.push(via_binary(
        2,
        "exact oracle (cli)",
        || {
            let a = exhaust(&["exact", "--law", "const:1", "--n", "4"])["p_trans"].as_f64().unwrap();
            let b = exhaust(&["exact", "--law", "bernoulli:0.6", "--n", "8"])["p_trans"].as_f64().unwrap();
            let closed = 0.6f64.powi(7) * 5040.0 / 8f64.powi(7);
            let (da, db) = ((a - 0.09375).abs(), (b - closed).abs());
            (da < 1e-12 && db < 1e-12, format!("|const:1 n=4 - 0.09375| = {da:.1e}; |bernoulli:0.6 n=8 - closed form| = {db:.1e}"))
        },
        1.0,
    ));
    println!("{}", results[1].line());

    let opts = RunOptions::default();
    let budgets = [(3, 30.0), (4, 120.0), (5, 300.0), (6, 1.0), (7, 10.0), (8, 600.0), (9, 60.0), (10, 120.0)];
    let checks: Vec<Box<dyn Fn() -> CriterionResult>> = vec![
        Box::new(|| verify::engine_equivalence(&opts)),
        Box::new(|| verify::lln(&opts)),
        Box::new(|| verify::clt(&opts)),
        Box::new(verify::rate_identities),
        Box::new(|| verify::decay(&opts)),
        Box::new(|| verify::heavy_tails(&opts)),
        Box::new(|| verify::gumbel(&opts)),
        Box::new(|| verify::subcritical(&opts)),
        Box::new(|| verify::reproducibility(&opts)),
    ];
    for check in checks {
        let mut r = check();
        if let Some(&(_, budget)) = budgets.iter().find(|b| b.0 == r.id) {
            if r.seconds >= budget {
                r.pass = false;
                r.detail.push_str(&format!("; over the {budget}s runtime budget"));
            }
        }
        println!("{}", r.line());
        results.push(r);
    }

    let failed: Vec<u32> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
