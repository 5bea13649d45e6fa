//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Every export takes plain numbers and strings and returns a JSON string;
//! the `*_json` functions behind them run natively too, which is how they
//! are tested.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use exhaust_core::harness::experiments::{simulate, Engine};
use exhaust_core::ldp::rate_surface;
use exhaust_core::limits::AsymptoticSummary;
use exhaust_core::numeric::linspace;
use exhaust_core::CapitalLaw;

const MAX_SIM_WORK: u64 = 20_000_000;

fn parse(law: &str) -> Result<CapitalLaw, String> {
    CapitalLaw::parse(law).map_err(|e| e.to_string())
}

/// JSON has no infinity; the page draws `null` as "unbounded".
fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn limits_json(law: &str) -> Result<Value, String> {
    Ok(AsymptoticSummary::of(&parse(law)?).to_json())
}

pub fn rate_surface_json(law: &str, points: usize, t_max: f64) -> Result<Value, String> {
    if !(2..=200).contains(&points) || !(t_max > 0.0) {
        return Err("need 2 <= points <= 200 and t_max > 0".into());
    }
    let law = parse(law)?;
    let r_grid = linspace(0.0, 1.0, points);
    let t_grid = linspace(0.0, t_max, points);
    let s = rate_surface(&law, &r_grid, &t_grid, 1).map_err(|e| e.to_string())?;
    let f: Vec<Vec<Value>> = s.values.iter().map(|row| row.iter().map(|p| finite_or_null(p.f)).collect()).collect();
    Ok(json!({ "law": s.law, "r": r_grid, "t": t_grid, "f": f }))
}

pub fn simulate_json(law: &str, n: u32, reps: u32, seed: u32) -> Result<Value, String> {
    let law = parse(law)?;
    let (n, reps) = (n as u64, reps as u64);
    if n == 0 || reps == 0 || n * reps > MAX_SIM_WORK {
        return Err(format!("need n, reps >= 1 and n * reps <= {MAX_SIM_WORK}"));
    }
    let outs = simulate(&law, n, reps, seed as u64, Engine::Coupled, 1).map_err(|e| e.to_string())?;
    let nf = n as f64;
    let points: Vec<[f64; 2]> = outs.iter().map(|o| [o.informed as f64 / nf, o.tau as f64 / nf]).collect();
    let full = outs.iter().filter(|o| o.full_transmission).count() as f64 / reps as f64;
    let summary = AsymptoticSummary::of(&law);
    Ok(json!({
        "law": law.to_string(),
        "n": n,
        "reps": reps,
        "points": points,
        "full_transmission": full,
        "theta": finite_or_null(summary.theta),
        "p": summary.p,
        "survival": summary.survival_prob,
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn limits(law: &str) -> Result<String, JsValue> {
    to_js(limits_json(law))
}

#[wasm_bindgen(js_name = rateSurface)]
pub fn rate_surface_js(law: &str, points: usize, t_max: f64) -> Result<String, JsValue> {
    to_js(rate_surface_json(law, points, t_max))
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(law: &str, n: u32, reps: u32, seed: u32) -> Result<String, JsValue> {
    to_js(simulate_json(law, n, reps, seed))
}
