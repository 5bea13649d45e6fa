//! Exact joint law of `(N(tau), tau)` for small `n` and bounded capital,
//! by a forward recursion over the live states `(N, S)` with `S >= 1`.
//!
//! Mass reaching `S = 0` is absorbed at `(N, t)`. Once `N = n` every
//! remaining emission fails, so that mass is absorbed directly at
//! `(n, t + S)`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::law::CapitalLaw;

pub const DEFAULT_BUDGET: u64 = 50_000;
const LIVE_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDistTable {
    pub law: String,
    pub n: u64,
    /// `(informed, tau) -> probability`.
    #[serde(skip)]
    pub entries: BTreeMap<(u64, u64), f64>,
    pub p_trans: f64,
    /// Live mass left when the recursion stopped.
    pub leaked_mass: f64,
    /// Largest `|live + absorbed - 1|` over all slices.
    pub max_conservation_error: f64,
    pub steps: u64,
}

impl JointDistTable {
    pub fn total_mass(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn marginal_informed(&self) -> BTreeMap<u64, f64> {
        let mut m = BTreeMap::new();
        for (&(i, _), &p) in &self.entries {
            *m.entry(i).or_insert(0.0) += p;
        }
        m
    }

    pub fn marginal_tau(&self) -> BTreeMap<u64, f64> {
        let mut m = BTreeMap::new();
        for (&(_, t), &p) in &self.entries {
            *m.entry(t).or_insert(0.0) += p;
        }
        m
    }

    pub fn mean_tau(&self) -> f64 {
        self.entries.iter().map(|(&(_, t), &p)| t as f64 * p).sum()
    }

    pub fn mean_informed(&self) -> f64 {
        self.entries.iter().map(|(&(i, _), &p)| i as f64 * p).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("informed,tau,prob\n");
        for (&(i, t), &p) in &self.entries {
            out.push_str(&format!("{i},{t},{p}\n"));
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "law": self.law,
            "n": self.n,
            "p_trans": self.p_trans,
            "mean_tau": self.mean_tau(),
            "mean_informed": self.mean_informed(),
            "leaked_mass": self.leaked_mass,
        })
    }
}

pub fn exact_joint(law: &CapitalLaw, n: u64) -> Result<JointDistTable> {
    exact_joint_with_budget(law, n, DEFAULT_BUDGET)
}

pub fn exact_joint_with_budget(law: &CapitalLaw, n: u64, budget: u64) -> Result<JointDistTable> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let (k_upper, support) = match (law.k_upper(), law.support()) {
        (Some(k), Some(s)) => (k, s),
        _ => return Err(Error::UnboundedLaw(law.to_string())),
    };
    let needed = n.saturating_mul(k_upper);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }

    let mut absorbed: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    let mut absorbed_total = 0.0;
    let mut absorb = |key: (u64, u64), p: f64, total: &mut f64| {
        *absorbed.entry(key).or_insert(0.0) += p;
        *total += p;
    };

    // Live slice keyed by (N, S), S >= 1.
    let mut live: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    let mut enter = |live: &mut BTreeMap<(u64, u64), f64>, n_inf: u64, s: u64, t: u64, p: f64, total: &mut f64| {
        if s == 0 {
            absorb((n_inf, t), p, total);
        } else if n_inf == n {
            absorb((n, t + s), p, total);
        } else {
            *live.entry((n_inf, s)).or_insert(0.0) += p;
        }
    };
    for &(k, p) in &support {
        enter(&mut live, 1, k, 0, p, &mut absorbed_total);
    }

    let nf = n as f64;
    let mut t = 0u64;
    let mut max_err = 0.0f64;
    let mut live_mass: f64 = live.values().fold(0.0, |a, b| a + b);
    while live_mass >= LIVE_TOL && t <= needed {
        let mut next = BTreeMap::new();
        for (&(i, s), &p) in &live {
            let fail = i as f64 / nf;
            enter(&mut next, i, s - 1, t + 1, p * fail, &mut absorbed_total);
            let succ = p * (1.0 - fail);
            for &(k, q) in &support {
                enter(&mut next, i + 1, s - 1 + k, t + 1, succ * q, &mut absorbed_total);
            }
        }
        live = next;
        t += 1;
        live_mass = live.values().fold(0.0, |a, b| a + b);
        max_err = max_err.max((live_mass + absorbed_total - 1.0).abs());
    }
    drop(enter);

    let p_trans = absorbed.iter().filter(|(&(i, _), _)| i == n).map(|(_, &p)| p).sum();
    Ok(JointDistTable {
        law: law.to_string(),
        n,
        entries: absorbed,
        p_trans,
        leaked_mass: live_mass,
        max_conservation_error: max_err,
        steps: t,
    })
}

pub fn exact_p_trans(law: &CapitalLaw, n: u64) -> Result<f64> {
    exact_joint(law, n).map(|t| t.p_trans)
}

/// `ln P(full transmission)` when `K` takes values in `{0, 1}` with
/// `P(K = 1) = q`: `(n-1) ln q + sum_{i<n} ln(1 - i/n)`. With at most one
/// unit of capital in play, every emission must reach a new server.
pub fn unit_capital_log_p_trans(q: f64, n: u64) -> f64 {
    let nf = n as f64;
    (n - 1) as f64 * q.ln() + (1..n).map(|i| (-(i as f64) / nf).ln_1p()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law(s: &str) -> CapitalLaw {
        CapitalLaw::parse(s).unwrap()
    }

    #[test]
    fn unit_capital_n4() {
        let t = exact_joint(&law("const:1"), 4).unwrap();
        assert!((t.p_trans - 0.09375).abs() < 1e-12);
        assert!((unit_capital_log_p_trans(1.0, 4).exp() - 0.09375).abs() < 1e-15);
    }

    #[test]
    fn bernoulli_n8_closed_form() {
        let p = exact_p_trans(&law("bernoulli:0.6"), 8).unwrap();
        let closed = 0.6f64.powi(7) * 5040.0 / 8f64.powi(7);
        assert!((p - closed).abs() < 1e-12);
        for n in 1..=12 {
            let p = exact_p_trans(&law("bernoulli:0.6"), n).unwrap();
            let c = unit_capital_log_p_trans(0.6, n).exp();
            assert!((p - c).abs() < 1e-12 * c.max(1e-3), "n = {n}");
        }
    }

    #[test]
    fn zero_capital_is_a_point_mass() {
        for n in [1, 3, 10] {
            let t = exact_joint(&law("const:0"), n).unwrap();
            assert_eq!(t.entries.len(), 1);
            assert_eq!(t.entries[&(1, 0)], 1.0);
        }
    }

    #[test]
    fn single_server_tau_is_capital() {
        let l = law("pmf:0:0.2,1:0.3,4:0.5");
        let t = exact_joint(&l, 1).unwrap();
        assert_eq!(t.p_trans, 1.0);
        for (k, p) in l.support().unwrap() {
            assert_eq!(t.entries[&(1, k)], p);
        }
    }

    #[test]
    fn mass_and_support_invariants() {
        for (s, n) in [("bernoulli:0.7", 6), ("const:2", 5), ("pmf:0:0.3,2:0.7", 6), ("pmf:1:0.5,3:0.5", 7)] {
            let l = law(s);
            let t = exact_joint(&l, n).unwrap();
            assert!((t.total_mass() + t.leaked_mass - 1.0).abs() < 1e-12, "{s}");
            assert!(t.max_conservation_error < 1e-13, "{s}");
            for &(i, tau) in t.entries.keys() {
                assert!(i <= tau + 1 && i <= n);
                assert!(tau <= l.k_upper().unwrap() * i);
            }
            let p: f64 = t.entries.iter().filter(|(k, _)| k.0 == n).map(|(_, v)| v).sum();
            assert_eq!(p, t.p_trans);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(exact_joint(&law("poisson:1"), 4), Err(Error::UnboundedLaw(_))));
        assert!(matches!(exact_joint(&law("const:1000"), 100), Err(Error::BudgetExceeded { .. })));
        assert!(exact_joint(&law("const:1"), 0).is_err());
    }
}
