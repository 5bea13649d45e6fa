//! Distribution of the per-server emission capital `K`.
//!
//! A [`CapitalLaw`] is parsed from a one-line spec:
//!
//! ```text
//! const:<k> | bernoulli:<q> | poisson:<lambda> | geom:<q>
//! pmf:<k1>:<p1>,<k2>:<p2>,... | ptail:<c>:<alpha>
//! ```
//!
//! `geom:<q>` has `P(K = k) = (1 - q) q^k` on `{0, 1, ...}`. `ptail:<c>:<alpha>`
//! is the integer law with survival function `P(K >= l) = min(1, c l^-alpha)`
//! for `l >= 1`, so that `P(K = 0) = 1 - min(1, c)`.
//!
//! Besides sampling, the law exposes the probability generating function,
//! the log-moment generating function `phi(a) = ln E exp(aK)` and its
//! convex conjugate, the Cramér rate
//!
//! ```text
//! I(u) = sup_a { a u - phi(a) }
//! ```
//!
//! Series truncation for unbounded laws: the Poisson and geometric families
//! use closed forms. `ptail` sums `P(K = k) z^k` term by term and stops at
//! the first `M` with `z^(M+1) P(K >= M+1) < 1e-12`, which bounds the
//! neglected remainder `sum_{k > M} P(K = k) z^k`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::open_unit;

/// Largest capital a single `ptail` draw can return. Draws beyond it are
/// clamped; sums of capitals saturate instead of wrapping.
pub const CAPITAL_CLAMP: u64 = 1 << 60;

const SERIES_TOL: f64 = 1e-12;
const RENORMALIZE_TOL: f64 = 1e-9;
const A_GUARD: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawKind {
    Constant { k: u64 },
    Bernoulli { q: f64 },
    Poisson { lambda: f64 },
    Geometric { q: f64 },
    /// Sorted by `k`, strictly positive probabilities only.
    Table { pmf: Vec<(u64, f64)> },
    ParetoTail { c: f64, alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapitalLaw {
    kind: LawKind,
    mean: f64,
    variance: f64,
    k_star: u64,
    /// `None` stands for an unbounded support.
    k_upper: Option<u64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

impl CapitalLaw {
    pub fn constant(k: u64) -> Self {
        Self::build(LawKind::Constant { k })
    }

    pub fn bernoulli(q: f64) -> Result<Self> {
        check_probability(q, &format!("bernoulli:{q}"))?;
        Ok(Self::build(LawKind::Bernoulli { q }))
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::MalformedLaw {
                spec: format!("poisson:{lambda}"),
                reason: "lambda must be positive and finite".into(),
            });
        }
        Ok(Self::build(LawKind::Poisson { lambda }))
    }

    pub fn geometric(q: f64) -> Result<Self> {
        let spec = format!("geom:{q}");
        check_probability(q, &spec)?;
        if q >= 1.0 {
            return Err(Error::MalformedLaw { spec, reason: "q must be < 1".into() });
        }
        Ok(Self::build(LawKind::Geometric { q }))
    }

    /// Finite table law. Probabilities summing to 1 within `1e-9` are
    /// renormalized; a larger deviation is rejected.
    pub fn table(entries: &[(u64, f64)]) -> Result<Self> {
        let spec = table_spec(entries);
        if entries.is_empty() {
            return Err(Error::MalformedLaw { spec, reason: "empty pmf".into() });
        }
        for &(_, p) in entries {
            check_probability(p, &spec)?;
        }
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if (total - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::PmfNotNormalized { spec, total });
        }
        if (total - 1.0).abs() > 1e-12 {
            log::warn!("pmf `{spec}` sums to {total}; renormalizing");
        }
        let mut merged: Vec<(u64, f64)> = Vec::new();
        let mut sorted = entries.to_vec();
        sorted.sort_by_key(|e| e.0);
        for (k, p) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += p,
                _ => merged.push((k, p)),
            }
        }
        merged.retain(|e| e.1 > 0.0);
        for e in &mut merged {
            e.1 /= total;
        }
        Ok(Self::build(LawKind::Table { pmf: merged }))
    }

    pub fn pareto_tail(c: f64, alpha: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite() && alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::MalformedLaw {
                spec: format!("ptail:{c}:{alpha}"),
                reason: "c and alpha must be positive and finite".into(),
            });
        }
        Ok(Self::build(LawKind::ParetoTail { c, alpha }))
    }

    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let malformed = |reason: &str| Error::MalformedLaw { spec: spec.to_string(), reason: reason.to_string() };
        let num = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| malformed(&format!("`{s}` is not a number")))
        };
        let (family, rest) = spec.split_once(':').ok_or_else(|| malformed("expected `<family>:<params>`"))?;
        match family {
            "const" => {
                let k = rest.trim().parse::<u64>().map_err(|_| malformed("const needs a nonnegative integer"))?;
                Ok(Self::constant(k))
            }
            "bernoulli" => Self::bernoulli(num(rest)?),
            "poisson" => Self::poisson(num(rest)?),
            "geom" => Self::geometric(num(rest)?),
            "pmf" => {
                let mut entries = Vec::new();
                for item in rest.split(',') {
                    let (k, p) = item.split_once(':').ok_or_else(|| malformed("pmf entries are `<k>:<p>`"))?;
                    let k = k.trim().parse::<u64>().map_err(|_| malformed(&format!("`{k}` is not a support point")))?;
                    entries.push((k, num(p)?));
                }
                Self::table(&entries)
            }
            "ptail" => {
                let (c, alpha) = rest.split_once(':').ok_or_else(|| malformed("ptail needs `<c>:<alpha>`"))?;
                Self::pareto_tail(num(c)?, num(alpha)?)
            }
            other => Err(malformed(&format!("unknown family `{other}`"))),
        }
    }

    fn build(kind: LawKind) -> Self {
        let (mean, variance) = moments(&kind);
        let (k_star, k_upper) = support_bounds(&kind);
        let cdf = match &kind {
            LawKind::Table { pmf } => pmf
                .iter()
                .scan(0.0, |acc, e| {
                    *acc += e.1;
                    Some(*acc)
                })
                .collect(),
            _ => Vec::new(),
        };
        Self { kind, mean, variance, k_star, k_upper, cdf }
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    /// `E K`, possibly `+inf`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `Var K`, possibly `+inf`.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn k_star(&self) -> u64 {
        self.k_star
    }

    pub fn k_upper(&self) -> Option<u64> {
        self.k_upper
    }

    /// `k_upper` as an extended real.
    pub fn k_upper_f64(&self) -> f64 {
        self.k_upper.map_or(f64::INFINITY, |k| k as f64)
    }

    pub fn is_bounded(&self) -> bool {
        self.k_upper.is_some()
    }

    /// Whether `E exp(aK) < inf` for some `a > 0`.
    pub fn has_exponential_moment(&self) -> bool {
        !matches!(self.kind, LawKind::ParetoTail { .. })
    }

    pub(crate) fn require_exponential_moment(&self) -> Result<()> {
        if self.has_exponential_moment() {
            Ok(())
        } else {
            Err(Error::NoExponentialMoment(self.to_string()))
        }
    }

    /// Support points with their probabilities, for bounded laws.
    pub fn support(&self) -> Option<Vec<(u64, f64)>> {
        match &self.kind {
            LawKind::Constant { k } => Some(vec![(*k, 1.0)]),
            LawKind::Bernoulli { q } => {
                Some([(0, 1.0 - q), (1, *q)].into_iter().filter(|e| e.1 > 0.0).collect())
            }
            LawKind::Table { pmf } => Some(pmf.clone()),
            LawKind::Geometric { q } if *q == 0.0 => Some(vec![(0, 1.0)]),
            _ => None,
        }
    }

    /// `P(K = k)`.
    pub fn pmf(&self, k: u64) -> f64 {
        match &self.kind {
            LawKind::Constant { k: c } => f64::from(u8::from(k == *c)),
            LawKind::Bernoulli { q } => match k {
                0 => 1.0 - q,
                1 => *q,
                _ => 0.0,
            },
            LawKind::Poisson { lambda } => {
                let kf = k as f64;
                (kf * lambda.ln() - lambda - ln_gamma(kf + 1.0)).exp()
            }
            LawKind::Geometric { q } => {
                if *q == 0.0 {
                    f64::from(u8::from(k == 0))
                } else {
                    (1.0 - q) * q.powf(k as f64)
                }
            }
            LawKind::Table { pmf } => pmf.iter().find(|e| e.0 == k).map_or(0.0, |e| e.1),
            LawKind::ParetoTail { c, alpha } => {
                if k == 0 {
                    1.0 - c.min(1.0)
                } else {
                    ptail_survival(*c, *alpha, k) - ptail_survival(*c, *alpha, k + 1)
                }
            }
        }
    }

    /// `P(K >= k)`.
    pub fn survival(&self, k: u64) -> f64 {
        if k == 0 {
            return 1.0;
        }
        match &self.kind {
            LawKind::ParetoTail { c, alpha } => ptail_survival(*c, *alpha, k),
            LawKind::Geometric { q } => q.powf(k as f64),
            LawKind::Poisson { .. } => {
                let below: f64 = (0..k).map(|j| self.pmf(j)).sum();
                (1.0 - below).max(0.0)
            }
            _ => self
                .support()
                .unwrap_or_default()
                .iter()
                .filter(|e| e.0 >= k)
                .map(|e| e.1)
                .sum(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.kind {
            LawKind::Constant { k } => *k,
            LawKind::Bernoulli { q } => u64::from(rng.gen::<f64>() < *q),
            LawKind::Poisson { lambda } => sample_poisson(*lambda, rng),
            LawKind::Geometric { q } => {
                if *q == 0.0 {
                    0
                } else {
                    // P(floor(ln U / ln q) >= k) = P(U <= q^k) = q^k.
                    let x = open_unit(rng).ln() / q.ln();
                    if x >= CAPITAL_CLAMP as f64 {
                        CAPITAL_CLAMP
                    } else {
                        x.floor() as u64
                    }
                }
            }
            LawKind::Table { pmf } => {
                let u = rng.gen::<f64>();
                let i = self.cdf.partition_point(|&c| c <= u).min(pmf.len() - 1);
                pmf[i].0
            }
            LawKind::ParetoTail { c, alpha } => {
                // K = #{l >= 1 : P(K >= l) >= U} = floor((c / U)^(1/alpha)).
                let x = (c / open_unit(rng)).powf(1.0 / alpha);
                if x >= CAPITAL_CLAMP as f64 {
                    CAPITAL_CLAMP
                } else {
                    x.floor() as u64
                }
            }
        }
    }

    /// Probability generating function `E z^K` on `[0, 1]`.
    pub fn pgf(&self, z: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::Domain(format!("pgf argument {z} outside [0, 1]")));
        }
        Ok(self.pgf_unchecked(z))
    }

    pub(crate) fn pgf_unchecked(&self, z: f64) -> f64 {
        if z == 1.0 {
            return 1.0;
        }
        match &self.kind {
            LawKind::Constant { k } => z.powf(*k as f64),
            LawKind::Bernoulli { q } => 1.0 - q + q * z,
            LawKind::Poisson { lambda } => (lambda * (z - 1.0)).exp(),
            LawKind::Geometric { q } => (1.0 - q) / (1.0 - q * z),
            LawKind::Table { pmf } => pmf.iter().map(|&(k, p)| p * z.powf(k as f64)).sum(),
            LawKind::ParetoTail { c, alpha } => {
                let mut total = 1.0 - c.min(1.0);
                if z == 0.0 {
                    return total;
                }
                let mut zk = 1.0;
                let mut s_k = ptail_survival(*c, *alpha, 1);
                let mut k = 1u64;
                loop {
                    zk *= z;
                    let s_next = ptail_survival(*c, *alpha, k + 1);
                    total += (s_k - s_next) * zk;
                    if zk * z * s_next < SERIES_TOL {
                        break;
                    }
                    s_k = s_next;
                    k += 1;
                }
                total
            }
        }
    }

    /// `phi(a) = ln E exp(aK)`; `+inf` where the expectation diverges.
    pub fn log_mgf(&self, a: f64) -> f64 {
        if a == 0.0 {
            return 0.0;
        }
        match &self.kind {
            LawKind::Poisson { lambda } => lambda * a.exp_m1(),
            LawKind::Geometric { q } => {
                if *q == 0.0 {
                    0.0
                } else if a >= -q.ln() {
                    f64::INFINITY
                } else {
                    (1.0 - q).ln() - (-(q * a.exp())).ln_1p()
                }
            }
            LawKind::ParetoTail { .. } => {
                if a > 0.0 {
                    f64::INFINITY
                } else {
                    self.pgf_unchecked(a.exp()).ln()
                }
            }
            _ => {
                let support = self.support().expect("bounded law");
                log_sum_exp(support.iter().map(|&(k, p)| p.ln() + a * k as f64))
            }
        }
    }

    /// Mean and variance of `K` under the exponential tilt `exp(aK - phi(a))`,
    /// i.e. `phi'(a)` and `phi''(a)`.
    pub fn tilted_moments(&self, a: f64) -> (f64, f64) {
        match &self.kind {
            LawKind::Poisson { lambda } => {
                let m = lambda * a.exp();
                (m, m)
            }
            LawKind::Geometric { q } => {
                let x = q * a.exp();
                if x >= 1.0 {
                    (f64::INFINITY, f64::INFINITY)
                } else {
                    (x / (1.0 - x), x / ((1.0 - x) * (1.0 - x)))
                }
            }
            LawKind::ParetoTail { .. } => (f64::NAN, f64::NAN),
            _ => {
                let support = self.support().expect("bounded law");
                let logs: Vec<f64> = support.iter().map(|&(k, p)| p.ln() + a * k as f64).collect();
                let norm = log_sum_exp(logs.iter().copied());
                let (mut m1, mut m2) = (0.0, 0.0);
                for (&(k, _), l) in support.iter().zip(&logs) {
                    let w = (l - norm).exp();
                    m1 += w * k as f64;
                    m2 += w * (k as f64) * (k as f64);
                }
                (m1, (m2 - m1 * m1).max(0.0))
            }
        }
    }

    /// Supremum of the domain of `phi`.
    fn log_mgf_domain_sup(&self) -> f64 {
        match &self.kind {
            LawKind::Geometric { q } if *q > 0.0 => -q.ln(),
            LawKind::ParetoTail { .. } => 0.0,
            _ => f64::INFINITY,
        }
    }

    /// Cramér rate `I(u)`, the Legendre transform of `phi`.
    ///
    /// Infinite outside `[k_star, k_upper]`; at the support edges it is
    /// `-ln P(K = edge)`. Inside, `a` solves `phi'(a) = u` by Newton steps
    /// kept inside a bisection bracket.
    pub fn cramer_rate(&self, u: f64) -> Result<f64> {
        self.require_exponential_moment()?;
        if u.is_nan() {
            return Err(Error::Domain("cramer_rate of NaN".into()));
        }
        let k_star = self.k_star as f64;
        let k_upper = self.k_upper_f64();
        if u < k_star || u > k_upper {
            return Ok(f64::INFINITY);
        }
        if u == k_star {
            return Ok(-self.pmf(self.k_star).ln());
        }
        if u == k_upper {
            return Ok(-self.pmf(self.k_upper.unwrap()).ln());
        }
        let a = self.solve_tilt(u);
        Ok((a * u - self.log_mgf(a)).max(0.0))
    }

    /// Root of `phi'(a) = u` for `u` strictly inside the support hull.
    fn solve_tilt(&self, u: f64) -> f64 {
        let g = |a: f64| self.tilted_moments(a).0 - u;
        let a_sup = self.log_mgf_domain_sup();

        let mut lo = -1.0f64;
        let mut hi = if a_sup.is_finite() { (0.5 * a_sup).min(1.0) } else { 1.0 };
        while g(hi) < 0.0 {
            lo = hi;
            hi = if a_sup.is_finite() { 0.5 * (hi + a_sup) } else { 2.0 * hi };
            if hi >= A_GUARD || a_sup - hi < 1e-15 {
                return hi.min(A_GUARD);
            }
        }
        while g(lo) > 0.0 {
            hi = lo;
            lo *= 2.0;
            if lo <= -A_GUARD {
                return -A_GUARD;
            }
        }

        let mut a = 0.0f64.clamp(lo, hi);
        for _ in 0..500 {
            let (m, v) = self.tilted_moments(a);
            let r = m - u;
            if r.abs() < 1e-12 {
                return a;
            }
            if r > 0.0 {
                hi = a;
            } else {
                lo = a;
            }
            let newton = a - r / v;
            a = if v > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 * a.abs().max(1.0) {
                break;
            }
        }
        a
    }
}

impl fmt::Display for CapitalLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            LawKind::Constant { k } => write!(f, "const:{k}"),
            LawKind::Bernoulli { q } => write!(f, "bernoulli:{q}"),
            LawKind::Poisson { lambda } => write!(f, "poisson:{lambda}"),
            LawKind::Geometric { q } => write!(f, "geom:{q}"),
            LawKind::Table { pmf } => f.write_str(&table_spec(pmf)),
            LawKind::ParetoTail { c, alpha } => write!(f, "ptail:{c}:{alpha}"),
        }
    }
}

impl FromStr for CapitalLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

fn table_spec(entries: &[(u64, f64)]) -> String {
    let body: Vec<String> = entries.iter().map(|(k, p)| format!("{k}:{p}")).collect();
    format!("pmf:{}", body.join(","))
}

fn check_probability(p: f64, spec: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange { spec: spec.to_string(), value: p })
    }
}

fn ptail_survival(c: f64, alpha: f64, l: u64) -> f64 {
    if l == 0 {
        1.0
    } else {
        (c * (l as f64).powf(-alpha)).min(1.0)
    }
}

/// `sum_{l > big_l} c l^-beta` for `beta > 1` by Euler-Maclaurin.
fn power_tail_sum(c: f64, beta: f64, big_l: f64) -> f64 {
    c * (big_l.powf(1.0 - beta) / (beta - 1.0) - 0.5 * big_l.powf(-beta)
        + beta * big_l.powf(-beta - 1.0) / 12.0)
}

fn moments(kind: &LawKind) -> (f64, f64) {
    match kind {
        LawKind::Constant { k } => (*k as f64, 0.0),
        LawKind::Bernoulli { q } => (*q, q * (1.0 - q)),
        LawKind::Poisson { lambda } => (*lambda, *lambda),
        LawKind::Geometric { q } => (q / (1.0 - q), q / ((1.0 - q) * (1.0 - q))),
        LawKind::Table { pmf } => {
            let m: f64 = pmf.iter().map(|&(k, p)| p * k as f64).sum();
            let m2: f64 = pmf.iter().map(|&(k, p)| p * (k as f64).powi(2)).sum();
            (m, (m2 - m * m).max(0.0))
        }
        LawKind::ParetoTail { c, alpha } => {
            if *alpha <= 1.0 {
                return (f64::INFINITY, f64::INFINITY);
            }
            // E K = sum_{l>=1} P(K >= l); E K^2 = sum_{l>=1} (2l - 1) P(K >= l).
            let big_l = (2.0 * c.powf(1.0 / alpha)).max(10_000.0).ceil();
            let mut m1 = 0.0;
            let mut m2 = 0.0;
            for l in 1..=(big_l as u64) {
                let s = ptail_survival(*c, *alpha, l);
                m1 += s;
                m2 += (2.0 * l as f64 - 1.0) * s;
            }
            m1 += power_tail_sum(*c, *alpha, big_l);
            if *alpha <= 2.0 {
                return (m1, f64::INFINITY);
            }
            m2 += power_tail_sum(2.0 * c, alpha - 1.0, big_l) - power_tail_sum(*c, *alpha, big_l);
            (m1, (m2 - m1 * m1).max(0.0))
        }
    }
}

fn support_bounds(kind: &LawKind) -> (u64, Option<u64>) {
    match kind {
        LawKind::Constant { k } => (*k, Some(*k)),
        LawKind::Bernoulli { q } => {
            if *q == 0.0 {
                (0, Some(0))
            } else if *q == 1.0 {
                (1, Some(1))
            } else {
                (0, Some(1))
            }
        }
        LawKind::Poisson { .. } => (0, None),
        LawKind::Geometric { q } => (0, if *q == 0.0 { Some(0) } else { None }),
        LawKind::Table { pmf } => (pmf[0].0, Some(pmf[pmf.len() - 1].0)),
        LawKind::ParetoTail { c, alpha } => {
            let k_star = if *c < 1.0 { 0 } else { c.powf(1.0 / alpha).floor().max(1.0) as u64 };
            (k_star, None)
        }
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    // Sequential inversion; large means are split so exp(-lambda) stays normal.
    const CHUNK: f64 = 500.0;
    if lambda > CHUNK {
        let parts = (lambda / CHUNK).ceil();
        return (0..parts as u64).map(|_| sample_poisson(lambda / parts, rng)).sum();
    }
    let u = rng.gen::<f64>();
    let mut k = 0u64;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u >= cdf {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
        if p < 1e-300 && cdf < u {
            // Rounding left the cdf short of u; the remaining mass is negligible.
            break;
        }
    }
    k
}
