use exhaust_core::harness::experiments::*;
use exhaust_core::harness::Strictness;
use exhaust_core::limits::survival_probability;
use exhaust_core::CapitalLaw;

fn law(s: &str) -> CapitalLaw {
    CapitalLaw::parse(s).unwrap()
}

fn opts() -> RunOptions {
    RunOptions { seed: 20, workers: 0, epsilon: None }
}

#[test]
fn clt_for_poisson() {
    let r = clt_experiment(&law("poisson:1.4998"), 10_000, 10_000, Engine::Coupled, &opts()).unwrap();
    assert!(r.all_tight_pass(), "{:#?}", r.verdicts);
}

#[test]
fn lln_for_poisson_within_one_percent() {
    let r = lln_experiment(&law("poisson:1.4998"), &[100_000], 200, Engine::Coupled, &opts()).unwrap();
    let stats = &r.per_n[0].stats;
    let (th, p) = (r.limits["theta"], r.limits["p"]);
    assert!((stats["tau_over_n|survived@eps"].mean - th).abs() < 0.01);
    assert!((stats["informed_over_n|survived@eps"].mean - p).abs() < 0.01);
    // Unconditionally a fraction 1 - survival of the runs dies out early.
    let surv = stats["survived_fraction@eps"].mean;
    assert!((surv - survival_probability(&law("poisson:1.4998"))).abs() < 0.08, "{surv}");
}

#[test]
fn gumbel_at_small_n_is_loose() {
    let r = gumbel_experiment(1000, 5000, &opts()).unwrap();
    let v = r.find("gumbel.ks").unwrap();
    assert_eq!(v.strictness, Strictness::Loose);
    assert_eq!(v.threshold, 0.05);
    assert!(v.pass, "{}", v.line());
}

#[test]
fn engines_agree_on_two_point_law() {
    let r = coupling_experiment(&law("pmf:0:0.3,2:0.7"), 8, 100_000, &opts()).unwrap();
    assert!(r.all_tight_pass(), "{:#?}", r.verdicts);
    assert!(r.find("coupling.markov_vs_coupled.p_value").is_some());
}

#[test]
fn heavy_tail_gap_does_not_grow() {
    let r = heavy_tail_experiment(1.0, 0.5, &[1000, 10_000], 2000, &opts()).unwrap();
    assert!(r.find("heavy_tail.gap_reduction").unwrap().pass);
    assert!(r.find("heavy_tail.p_trans_minus_survival").unwrap().pass);
}

#[test]
fn decay_trend_for_constant_two() {
    let ns: Vec<u64> = (5..=20).collect();
    let r = decay_experiment(&law("const:2"), &ns, &opts()).unwrap();
    let g = r.limits["decay_rate"];
    let rates: Vec<f64> = r.per_n.iter().map(|p| p.values["rate"]).collect();
    // Above the limit throughout, and closing in on it.
    assert!(rates.iter().all(|&x| x > g));
    assert!(rates[rates.len() - 1] - g < rates[0] - g);
    assert!(rates[1..].windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn decay_needs_three_points_and_a_bounded_law() {
    assert!(decay_experiment(&law("const:2"), &[5, 6], &opts()).is_err());
    assert!(decay_experiment(&law("poisson:2"), &[5, 6, 7], &opts()).is_err());
}

#[test]
fn proxy_thresholds_are_recorded() {
    let r = lln_experiment(&law("const:2"), &[2000], 50, Engine::Markov, &RunOptions { epsilon: Some(0.2), ..opts() }).unwrap();
    assert_eq!(r.params.epsilon, Some(0.2));
    assert!(r.per_n[0].stats.contains_key("tau_over_n|survived@eps_half"));
    for v in &r.verdicts {
        assert!(v.threshold.is_finite());
    }
}
