//! The acceptance suite: one check per numbered criterion, each with its
//! fixed parameters and tolerance.

use std::time::Instant;

use crate::error::Result;
use crate::exact::exact_p_trans;
use crate::law::CapitalLaw;
use crate::ldp::{composite_rate_f, contracted_rate_g, coupon_rate_j, decay_rate, rho, rho_residual};
use crate::limits::{coverage_p, theta};

use super::experiments::*;
use super::report::{ExperimentReport, Verdict};

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u32,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<28} {}  ({:.1}s) {}",
            self.id,
            self.title,
            if self.pass { "PASS" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

struct Checks(Vec<(String, bool)>);

impl Checks {
    fn new() -> Self {
        Checks(Vec::new())
    }

    fn add(&mut self, label: impl Into<String>, pass: bool) {
        self.0.push((label.into(), pass));
    }

    fn verdicts(&mut self, report: &ExperimentReport, names: &[&str]) {
        for name in names {
            match report.find(name) {
                Some(v) => self.add(describe(v), v.pass),
                None => self.add(format!("{name}: missing"), false),
            }
        }
    }

    fn finish(self) -> (bool, String) {
        let pass = self.0.iter().all(|c| c.1);
        let detail = self.0.iter().map(|c| c.0.as_str()).collect::<Vec<_>>().join("; ");
        (pass, detail)
    }
}

fn describe(v: &Verdict) -> String {
    format!("{} = {:.3e} {} {}", v.name, v.measured, v.comparator.symbol(), v.threshold)
}

fn law(s: &str) -> CapitalLaw {
    CapitalLaw::parse(s).expect("built-in law spec")
}

fn timed(id: u32, title: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CriterionResult {
    let start = Instant::now();
    let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult { id, title, pass, detail, seconds: start.elapsed().as_secs_f64() }
}

pub fn figure_constants() -> CriterionResult {
    timed(1, "limit constants", || {
        let l = law("poisson:1.4998");
        let (t, p) = (theta(&l), coverage_p(&l));
        let mut c = Checks::new();
        c.add(format!("theta = {t:.6}"), (t - 0.8740).abs() < 5e-4);
        c.add(format!("p = {p:.6}"), (p - 0.5827).abs() < 5e-4);
        Ok(c.finish())
    })
}

pub fn exact_ground_truth() -> CriterionResult {
    timed(2, "exact oracle", || {
        let mut c = Checks::new();
        let a = exact_p_trans(&law("const:1"), 4)?;
        c.add(format!("const:1 n=4: {a:e}"), (a - 0.09375).abs() < 1e-12);
        let b = exact_p_trans(&law("bernoulli:0.6"), 8)?;
        let closed = 0.6f64.powi(7) * 5040.0 / 8f64.powi(7);
        c.add(format!("bernoulli:0.6 n=8: |diff| = {:.1e}", (b - closed).abs()), (b - closed).abs() < 1e-12);
        Ok(c.finish())
    })
}

pub fn engine_equivalence(opts: &RunOptions) -> CriterionResult {
    timed(3, "engine equivalence", || {
        let mut c = Checks::new();
        for (spec, n) in [("bernoulli:0.7", 6), ("const:2", 5)] {
            let r = coupling_experiment(&law(spec), n, 100_000, opts)?;
            for v in r.verdicts.iter().filter(|v| v.name.ends_with("_vs_exact.p_value")) {
                c.add(format!("{spec} {}", describe(v)), v.pass);
            }
        }
        Ok(c.finish())
    })
}

pub fn lln(opts: &RunOptions) -> CriterionResult {
    timed(4, "law of large numbers", || {
        let mut c = Checks::new();
        let a = lln_experiment(&law("const:2"), &[100_000], 100, Engine::Coupled, opts)?;
        c.verdicts(&a, &["lln.tau_over_n_minus_theta"]);
        let b = lln_experiment(&law("poisson:1.4998"), &[100_000], 200, Engine::Coupled, opts)?;
        c.verdicts(&b, &["lln.informed_over_n_minus_p"]);
        Ok(c.finish())
    })
}

pub fn clt(opts: &RunOptions) -> CriterionResult {
    timed(5, "central limit theorem", || {
        let mut c = Checks::new();
        let r = clt_experiment(&law("const:2"), 10_000, 10_000, Engine::Coupled, opts)?;
        c.verdicts(&r, &["clt.tau_variance_ratio_error", "clt.informed_variance_ratio_error", "clt.tau_ks", "clt.informed_ks"]);
        Ok(c.finish())
    })
}

pub fn rate_identities() -> CriterionResult {
    timed(6, "rate-function identities", || {
        let mut c = Checks::new();
        let l = law("poisson:1.4998");
        let (t, p) = (theta(&l), coverage_p(&l));
        let f = composite_rate_f(&l, p, t)?.f;
        c.add(format!("F(p, theta) = {f:.1e}"), f.abs() < 1e-6);
        let f0 = composite_rate_f(&l, 0.0, 0.0)?.f;
        c.add(format!("F(0, 0) = {f0}"), f0 == 0.0);
        let grid = [0.1, 0.5, 1.0, 2.0, 4.0];
        let worst_j = grid.iter().map(|&t| coupon_rate_j(t, -(-t as f64).exp_m1()).abs()).fold(0.0, f64::max);
        c.add(format!("max J_t(1 - e^-t) = {worst_j:.1e}"), worst_j < 1e-10);
        let mut worst_rho = 0.0f64;
        for &t in &grid {
            for frac in [0.05, 0.3, 0.6, 0.9, 0.99] {
                let r = frac * t;
                worst_rho = worst_rho.max(rho_residual(r, t, rho(r, t)?));
            }
        }
        c.add(format!("max rho residual = {worst_rho:.1e}"), worst_rho < 1e-12);
        for spec in ["poisson:1.4998", "bernoulli:0.6", "const:2"] {
            let l = law(spec);
            let (g1, d) = (contracted_rate_g(&l, 1.0)?, decay_rate(&l)?);
            c.add(format!("{spec}: |G(1) - decay| = {:.1e}", (g1 - d).abs()), (g1 - d).abs() < 1e-9);
        }
        Ok(c.finish())
    })
}

pub fn decay(opts: &RunOptions) -> CriterionResult {
    timed(7, "decay rate", || {
        let ns = [8, 16, 25, 50, 100, 200, 400];
        let mut c = Checks::new();
        let b = decay_experiment(&law("bernoulli:0.6"), &ns, opts)?;
        c.verdicts(&b, &["decay.rate_minus_closed_form", "decay.extrapolated_relative_error", "decay.largest_n_relative_error"]);
        let one = decay_experiment(&law("const:1"), &ns, opts)?;
        let g = one.limits["decay_rate"];
        c.add(format!("const:1 decay = {g:.12}"), (g - 1.0).abs() < 1e-9);
        c.verdicts(&one, &["decay.largest_n_relative_error"]);
        Ok(c.finish())
    })
}

pub fn heavy_tails(opts: &RunOptions) -> CriterionResult {
    timed(8, "heavy-tail regimes", || {
        let mut c = Checks::new();
        let h = heavy_tail_experiment(1.0, 0.5, &[10_000], 10_000, opts)?;
        c.verdicts(&h, &["heavy_tail.p_trans_minus_survival"]);
        let below = critical_tail_experiment(0.5, 10_000, 10_000, opts)?;
        c.verdicts(&below, &["critical_tail.ratio_below"]);
        let above = critical_tail_experiment(2.0, 10_000, 10_000, opts)?;
        c.verdicts(&above, &["critical_tail.ratio_above"]);
        let one = critical_tail_experiment(1.0, 10_000, 10_000, opts)?;
        c.verdicts(&one, &["critical_tail.self_consistency"]);
        Ok(c.finish())
    })
}

pub fn gumbel(opts: &RunOptions) -> CriterionResult {
    timed(9, "gumbel limit", || {
        let mut c = Checks::new();
        let r = gumbel_experiment(100_000, 5000, opts)?;
        c.verdicts(&r, &["gumbel.ks"]);
        Ok(c.finish())
    })
}

pub fn subcritical(opts: &RunOptions) -> CriterionResult {
    timed(10, "subcritical regime", || {
        let mut c = Checks::new();
        let r = subcritical_experiment(&law("bernoulli:0.5"), 10_000, 100_000, opts)?;
        c.verdicts(&r, &["subcritical.tv_tau_plus_one_vs_progeny", "subcritical.tv_informed_vs_progeny"]);
        Ok(c.finish())
    })
}

/// Re-runs a spread of experiments single-threaded and with several
/// workers and compares the serialized reports byte for byte.
pub fn reproducibility(opts: &RunOptions) -> CriterionResult {
    timed(11, "reproducibility", || {
        let mut c = Checks::new();
        let runs: Vec<(&str, Box<dyn Fn(&RunOptions) -> Result<ExperimentReport>>)> = vec![
            ("lln", Box::new(|o| lln_experiment(&law("poisson:1.4998"), &[2000, 5000], 200, Engine::Markov, o))),
            ("clt", Box::new(|o| clt_experiment(&law("const:2"), 2000, 500, Engine::Coupled, o))),
            ("coupling", Box::new(|o| coupling_experiment(&law("pmf:0:0.3,2:0.7"), 8, 5000, o))),
            ("heavy-tail", Box::new(|o| heavy_tail_experiment(1.0, 0.5, &[1000, 2000], 500, o))),
            ("critical-tail", Box::new(|o| critical_tail_experiment(1.0, 2000, 300, o))),
            ("gumbel", Box::new(|o| gumbel_experiment(2000, 500, o))),
            ("subcritical", Box::new(|o| subcritical_experiment(&law("bernoulli:0.5"), 1000, 2000, o))),
        ];
        for (name, run) in runs {
            let single = run(&RunOptions { workers: 1, ..*opts })?.to_json();
            let multi = run(&RunOptions { workers: 4, ..*opts })?.to_json();
            c.add(format!("{name}: {}", if single == multi { "identical" } else { "differs" }), single == multi);
        }
        Ok(c.finish())
    })
}

/// Criteria that can run inside the library; 1 and 2 are also exercised
/// through the command line by the acceptance test.
pub fn run_all(opts: &RunOptions, mut on_result: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let checks: Vec<Box<dyn Fn() -> CriterionResult + '_>> = vec![
        Box::new(figure_constants),
        Box::new(exact_ground_truth),
        Box::new(|| engine_equivalence(opts)),
        Box::new(|| lln(opts)),
        Box::new(|| clt(opts)),
        Box::new(rate_identities),
        Box::new(|| decay(opts)),
        Box::new(|| heavy_tails(opts)),
        Box::new(|| gumbel(opts)),
        Box::new(|| subcritical(opts)),
        Box::new(|| reproducibility(opts)),
    ];
    checks
        .into_iter()
        .map(|check| {
            let r = check();
            on_result(&r);
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_criteria_pass() {
        for r in [figure_constants(), exact_ground_truth(), rate_identities()] {
            assert!(r.pass, "{}", r.line());
        }
    }
}
