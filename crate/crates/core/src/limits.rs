//! Limit constants of the transmission process.
//!
//! `theta` is the root of `(1 - e^-theta) / theta = 1 / E K` (0 when
//! `E K <= 1`, infinite when `E K` is), `p = 1 - e^-theta`, and the
//! survival probability of the Galton-Watson tree is one minus the smallest
//! fixed point of the pgf. For `E K > 1` with finite variance the CLT
//! variances are
//!
//! ```text
//! sigma_tau^2 = [(1-p) E K - 1]^-2 [p sigma_K^2 + (E K)^2 sigma_N(theta)^2]
//! sigma_p^2   = [(1-p) E K - 1]^-2 [p sigma_K^2 e^-2theta + sigma_N(theta)^2]
//! ```

use serde_json::{Map, Value};

use crate::coupon::sigma_n_sq;
use crate::error::{Error, Result};
use crate::extjson;
use crate::law::CapitalLaw;
use crate::numeric::{bisect_decreasing, one_minus_exp_over};

/// `E K` values within this distance above 1 are treated as critical.
pub const CRITICAL_DEADBAND: f64 = 1e-12;

/// Root of `(1 - e^-x) / x = 1 / m`; also the inverse of
/// `lambda(s) = s / (1 - e^-s)`.
pub fn theta_for_mean(m: f64) -> f64 {
    if m.is_nan() || m <= 1.0 + CRITICAL_DEADBAND {
        return 0.0;
    }
    if m.is_infinite() {
        return f64::INFINITY;
    }
    let target = 1.0 / m;
    let mut hi = 1.0;
    while one_minus_exp_over(hi) >= target {
        hi *= 2.0;
    }
    bisect_decreasing(|x| one_minus_exp_over(x) - target, 1e-12, hi)
}

pub fn theta(law: &CapitalLaw) -> f64 {
    theta_for_mean(law.mean())
}

/// `p = 1 - e^-theta`.
pub fn coverage_p(law: &CapitalLaw) -> f64 {
    let p = p_from_theta(theta(law));
    let residual = p_residual(law.mean(), p);
    if residual > 1e-9 {
        log::error!("p = {p} for {law} leaves residual {residual} in p E K = -ln(1 - p)");
    }
    p
}

fn p_from_theta(theta: f64) -> f64 {
    if theta.is_infinite() {
        1.0
    } else {
        -(-theta).exp_m1()
    }
}

/// `|p E K + ln(1 - p)|`, or 0 outside `1 < E K < inf`.
pub fn p_residual(mean: f64, p: f64) -> f64 {
    if mean > 1.0 + CRITICAL_DEADBAND && mean.is_finite() {
        (p * mean + (-p).ln_1p()).abs()
    } else {
        0.0
    }
}

/// Probability that the Galton-Watson tree is infinite.
pub fn survival_probability(law: &CapitalLaw) -> f64 {
    if law.mean() <= 1.0 && law.pmf(1) < 1.0 {
        return 0.0;
    }
    1.0 - extinction_probability(law)
}

/// Smallest fixed point of the pgf, by monotone iteration from 0.
pub fn extinction_probability(law: &CapitalLaw) -> f64 {
    let mut z = 0.0;
    for _ in 0..10_000_000 {
        let next = law.pgf_unchecked(z);
        if (next - z).abs() < 1e-13 {
            return next;
        }
        z = next;
    }
    log::warn!("pgf iteration for {law} did not settle");
    z
}

pub fn clt_variances(law: &CapitalLaw) -> Result<(f64, f64)> {
    let m = law.mean();
    if !(m > 1.0 + CRITICAL_DEADBAND) {
        return Err(Error::Precondition(format!("CLT needs E K > 1, {law} has E K = {m}")));
    }
    let var_k = law.variance();
    if !var_k.is_finite() {
        return Err(Error::Precondition(format!("CLT needs E K^2 < inf, which fails for {law}")));
    }
    let theta = theta(law);
    let p = p_from_theta(theta);
    let sn = sigma_n_sq(theta)?;
    let d = ((1.0 - p) * m - 1.0).powi(2);
    let e = (-theta).exp();
    Ok(((p * var_k + m * m * sn) / d, (p * var_k * e * e + sn) / d))
}

/// Default survival-proxy threshold `min(0.1, theta / 2)`. When `theta` is 0
/// or infinite the formula is uninformative and 0.1 is used.
pub fn default_epsilon(law: &CapitalLaw) -> f64 {
    let theta = theta(law);
    if theta > 0.0 && theta.is_finite() {
        (0.5 * theta).min(0.1)
    } else {
        0.1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticSummary {
    pub law: String,
    pub mean: f64,
    pub variance: f64,
    pub theta: f64,
    pub p: f64,
    pub survival_prob: f64,
    /// `None` when the CLT preconditions fail.
    pub sigma_tau_sq: Option<f64>,
    pub sigma_p_sq: Option<f64>,
    pub epsilon: f64,
}

impl AsymptoticSummary {
    pub fn of(law: &CapitalLaw) -> Self {
        let clt = clt_variances(law).ok();
        Self {
            law: law.to_string(),
            mean: law.mean(),
            variance: law.variance(),
            theta: theta(law),
            p: coverage_p(law),
            survival_prob: survival_probability(law),
            sigma_tau_sq: clt.map(|c| c.0),
            sigma_p_sq: clt.map(|c| c.1),
            epsilon: default_epsilon(law),
        }
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("law".into(), Value::String(self.law.clone()));
        extjson::put(&mut m, "mean", self.mean);
        extjson::put(&mut m, "variance", self.variance);
        extjson::put(&mut m, "theta", self.theta);
        m.insert("p".into(), self.p.into());
        m.insert("survival_prob".into(), self.survival_prob.into());
        for (key, v) in [("sigma_tau_sq", self.sigma_tau_sq), ("sigma_p_sq", self.sigma_p_sq)] {
            match v {
                Some(x) => extjson::put(&mut m, key, x),
                None => {
                    m.insert(key.into(), Value::Null);
                }
            }
        }
        m.insert("epsilon".into(), self.epsilon.into());
        Value::Object(m)
    }

    /// Aligned two-column table.
    pub fn to_table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("undefined".to_string(), fmt_ext);
        let rows = [
            ("law", self.law.clone()),
            ("mean", fmt_ext(self.mean)),
            ("variance", fmt_ext(self.variance)),
            ("theta", fmt_ext(self.theta)),
            ("p", fmt_ext(self.p)),
            ("survival_prob", fmt_ext(self.survival_prob)),
            ("sigma_tau_sq", opt(self.sigma_tau_sq)),
            ("sigma_p_sq", opt(self.sigma_p_sq)),
            ("epsilon", fmt_ext(self.epsilon)),
        ];
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
    }
}

fn fmt_ext(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.10}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law(s: &str) -> CapitalLaw {
        CapitalLaw::parse(s).unwrap()
    }

    #[test]
    fn theta_examples() {
        assert!((theta(&law("poisson:1.4998")) - 0.8740).abs() < 5e-4);
        assert_eq!(theta(&law("bernoulli:0.5")), 0.0);
        let t = theta(&law("const:2"));
        assert!((t - 1.59362).abs() < 1e-5, "{t}");
        assert!((one_minus_exp_over(t) - 0.5).abs() < 1e-12);
        assert_eq!(theta(&law("ptail:1:0.5")), f64::INFINITY);
        assert_eq!(theta(&law("const:1")), 0.0);
    }

    #[test]
    fn p_examples() {
        assert!((coverage_p(&law("poisson:1.4998")) - 0.5827).abs() < 5e-4);
        assert_eq!(coverage_p(&law("bernoulli:0.3")), 0.0);
        assert!((coverage_p(&law("const:2")) - 0.79681).abs() < 1e-5);
        assert_eq!(coverage_p(&law("ptail:1:1")), 1.0);
        let l = law("poisson:3");
        assert!(p_residual(l.mean(), coverage_p(&l)) < 1e-12);
    }

    #[test]
    fn theta_increases_with_mean() {
        let ts: Vec<f64> = [1.1, 1.5, 2.0, 3.0].iter().map(|&m| theta(&CapitalLaw::poisson(m).unwrap())).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]), "{ts:?}");
        for (&m, &t) in [1.1, 1.5, 2.0, 3.0].iter().zip(&ts) {
            assert!((one_minus_exp_over(t) - 1.0 / m).abs() < 1e-12);
        }
    }

    #[test]
    fn survival_examples() {
        assert_eq!(survival_probability(&law("bernoulli:0.9")), 0.0);
        assert_eq!(survival_probability(&law("const:2")), 1.0);
        assert_eq!(survival_probability(&law("const:1")), 1.0);
        let l = law("poisson:1.4998");
        let s = 1.0 - survival_probability(&l);
        assert!((s - (1.4998 * (s - 1.0)).exp()).abs() < 1e-12);
        assert!(s > 0.0 && s < 1.0);
        let h = law("ptail:0.5:1");
        let z = extinction_probability(&h);
        assert!((z - h.pgf(z).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn clt_constant_two() {
        let (st, sp) = clt_variances(&law("const:2")).unwrap();
        assert!((st - 1.0909).abs() < 1e-3, "{st}");
        assert!((sp - 0.2727).abs() < 1e-3, "{sp}");
        assert!((st - 4.0 * sp).abs() < 1e-12);
        assert!(matches!(clt_variances(&law("bernoulli:0.5")), Err(Error::Precondition(_))));
        assert!(matches!(clt_variances(&law("ptail:2:1.5")), Err(Error::Precondition(_))));
    }

    #[test]
    fn summary_json_flags_infinity() {
        let v = AsymptoticSummary::of(&law("ptail:1:0.5")).to_json();
        assert!(v["theta"].is_null());
        assert_eq!(v["theta_infinite"], Value::Bool(true));
        assert!(v["sigma_tau_sq"].is_null());
        let t = AsymptoticSummary::of(&law("poisson:1.4998")).to_table();
        assert!(t.contains("theta"));
    }
}
