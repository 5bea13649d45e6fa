//! Large-deviation rate functions of the transmission process.
//!
//! For the coupon collector at rescaled time `t` having collected a
//! fraction `r`, the rate is
//!
//! ```text
//! J_t(r) = (1-r) ln(1-r) + (t-r) ln rho + t e^(-t rho),
//! ```
//!
//! where `rho = rho(r, t)` solves `(1 - e^(-t rho)) / rho = r`. The joint
//! rate of `(N(tau)/n, tau/n)` is `F(r, t) = r I(t/r) + J_t(r)` with `I` the
//! Cramér rate of `K`, `F(0, 0) = 0` and `F(0, t) = inf` for `t > 0`.
//!
//! The decay rate of the full-transmission probability is
//!
//! ```text
//! G(1) = inf_{s >= 0} { I(lambda(s)) + (lambda(s) - 1) ln(1 - e^-s) + lambda(s) e^-s },
//! lambda(s) = s / (1 - e^-s).
//! ```
//!
//! `I(lambda(s))` is finite only while `lambda(s)` lies in
//! `[max(k_star, 1), k_upper]`. `lambda` is increasing, so the search is
//! restricted to the matching `s` interval (capped at 50), and `lambda` is
//! clamped into the support hull so that a degenerate interval is still
//! evaluated exactly at its endpoint.

use serde_json::{Map, Value};

use crate::batch::map_replicates;
use crate::error::{Error, Result};
use crate::extjson;
use crate::law::CapitalLaw;
use crate::limits::theta_for_mean;
use crate::numeric::{bisect_decreasing, grid_then_golden, one_minus_exp_over, xlogx};

pub const S_CAP: f64 = 50.0;
const GRID_POINTS: usize = 1000;
const S_TOL: f64 = 1e-10;

/// `rho(r, t)`; 0 at `r = t`.
pub fn rho(r: f64, t: f64) -> Result<f64> {
    if !(r > 0.0 && r <= t) {
        return Err(Error::Domain(format!("rho needs 0 < r <= t, got r = {r}, t = {t}")));
    }
    if r == t {
        return Ok(0.0);
    }
    let h = |x: f64| t * one_minus_exp_over(t * x) - r;
    let mut hi = 1.0;
    while h(hi) > 0.0 {
        hi *= 2.0;
    }
    Ok(bisect_decreasing(h, 0.0, hi))
}

/// `|(1 - e^(-t rho)) / rho - r|`.
pub fn rho_residual(r: f64, t: f64, rho: f64) -> f64 {
    (t * one_minus_exp_over(t * rho) - r).abs()
}

/// `J_t(r)`, infinite outside `0 < r <= min(t, 1)`.
pub fn coupon_rate_j(t: f64, r: f64) -> f64 {
    if !(t > 0.0) || !(r > 0.0) || r > t.min(1.0) {
        return f64::INFINITY;
    }
    if r == t {
        return xlogx(1.0 - t) + t;
    }
    let rho = rho(r, t).expect("0 < r < t");
    xlogx(1.0 - r) + (t - r) * rho.ln() + t * (-t * rho).exp()
}

/// `lambda(s) = s / (1 - e^-s)`, with `lambda(0) = 1`.
pub fn lambda_of_s(s: f64) -> f64 {
    if s < 1e-6 {
        1.0 + s / 2.0 + s * s / 12.0
    } else {
        s / -(-s).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub r: f64,
    pub t: f64,
    pub rho: f64,
    pub j: f64,
    pub i_component: f64,
    pub f: f64,
}

impl RatePoint {
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        for (k, v) in [("r", self.r), ("t", self.t), ("rho", self.rho), ("J", self.j), ("I_component", self.i_component), ("F", self.f)] {
            extjson::put(&mut m, k, v);
        }
        Value::Object(m)
    }

    fn csv_row(&self) -> String {
        [self.r, self.t, self.rho, self.j, self.i_component, self.f]
            .iter()
            .map(|&v| fmt_csv(v))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Shortest round-trip representation; infinities as `inf`.
pub fn fmt_csv(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

/// `F(r, t)` with its components.
pub fn composite_rate_f(law: &CapitalLaw, r: f64, t: f64) -> Result<RatePoint> {
    law.require_exponential_moment()?;
    Ok(rate_point(law, r, t))
}

fn rate_point(law: &CapitalLaw, r: f64, t: f64) -> RatePoint {
    if r == 0.0 {
        let f = if t == 0.0 { 0.0 } else { f64::INFINITY };
        return RatePoint { r, t, rho: f64::INFINITY, j: f64::INFINITY, i_component: f, f };
    }
    let rho = if r > 0.0 && r <= t { rho(r, t).expect("checked") } else { f64::INFINITY };
    let j = coupon_rate_j(t, r);
    let i_component = if r > 0.0 && t >= 0.0 {
        r * law.cramer_rate(t / r).expect("exponential moment checked")
    } else {
        f64::INFINITY
    };
    RatePoint { r, t, rho, j, i_component, f: i_component + j }
}

/// The `s` interval where `I(lambda(s))` is finite, and the support hull
/// `lambda` is clamped to.
fn feasible(law: &CapitalLaw) -> ((f64, f64), (f64, f64)) {
    let lam_lo = (law.k_star() as f64).max(1.0);
    let lam_hi = law.k_upper_f64();
    let s_lo = theta_for_mean(lam_lo);
    let s_hi = theta_for_mean(lam_hi).min(S_CAP).max(s_lo);
    ((s_lo, s_hi), (lam_lo, lam_hi))
}

/// `inf_s { I(lambda) + (lambda - 1) ln((1 - e^-s) / r) + lambda e^-s }`
/// and its argmin.
fn variational_inf(law: &CapitalLaw, r: f64) -> (f64, f64) {
    let ((s_lo, s_hi), (lam_lo, lam_hi)) = feasible(law);
    let ln_r = r.ln();
    let objective = |s: f64| {
        let lam = lambda_of_s(s).clamp(lam_lo, lam_hi);
        let log_term = if s == 0.0 || lam == 1.0 { 0.0 } else { (lam - 1.0) * ((-(-s).exp_m1()).ln() - ln_r) };
        law.cramer_rate(lam).expect("exponential moment checked") + log_term + lam * (-s).exp()
    };
    let (s, v) = grid_then_golden(objective, s_lo, s_hi, GRID_POINTS, S_TOL);
    (v, s)
}

/// Decay rate `G(1)` of the full-transmission probability, and the
/// minimizing `s`.
pub fn decay_rate_argmin(law: &CapitalLaw) -> Result<(f64, f64)> {
    law.require_exponential_moment()?;
    if law.k_upper() == Some(0) {
        return Ok((f64::INFINITY, f64::NAN));
    }
    let (v, s) = variational_inf(law, 1.0);
    debug_assert!(v > 0.0, "decay rate of {law} is {v}");
    Ok((v, s))
}

pub fn decay_rate(law: &CapitalLaw) -> Result<f64> {
    decay_rate_argmin(law).map(|x| x.0)
}

/// Rate `G(r)` of `N(tau)/n`: 0 at `r = 0`, infinite for `r > 1`.
pub fn contracted_rate_g(law: &CapitalLaw, r: f64) -> Result<f64> {
    law.require_exponential_moment()?;
    if r == 0.0 {
        return Ok(0.0);
    }
    if !(r > 0.0 && r <= 1.0) {
        return Ok(f64::INFINITY);
    }
    if law.k_upper() == Some(0) {
        return Ok(f64::INFINITY);
    }
    let (v, _) = variational_inf(law, r);
    Ok(xlogx(1.0 - r) + r * v)
}

/// `g(s) = (1 - e^(-s rho)) / rho` with `rho = rho(r, t)`.
pub fn optimal_coupon_path(r: f64, t: f64, s: f64) -> Result<f64> {
    if !(r > 0.0 && r < t) {
        return Err(Error::Domain(format!("optimal path needs 0 < r < t, got r = {r}, t = {t}")));
    }
    if !(0.0..=t).contains(&s) {
        return Err(Error::Domain(format!("optimal path needs 0 <= s <= t, got s = {s}")));
    }
    let rho = rho(r, t)?;
    Ok(s * one_minus_exp_over(s * rho))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSurface {
    pub law: String,
    pub r_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `values[i][j]` is the point `(r_grid[i], t_grid[j])`.
    pub values: Vec<Vec<RatePoint>>,
}

impl RateSurface {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,t,rho,J,I_component,F\n");
        for row in &self.values {
            for p in row {
                out.push_str(&p.csv_row());
                out.push('\n');
            }
        }
        out
    }

    pub fn get(&self, i: usize, j: usize) -> &RatePoint {
        &self.values[i][j]
    }
}

/// Evaluates `F` on a grid; rows are computed in parallel and returned in
/// grid order.
pub fn rate_surface(law: &CapitalLaw, r_grid: &[f64], t_grid: &[f64], workers: usize) -> Result<RateSurface> {
    law.require_exponential_moment()?;
    for (name, g) in [("r", r_grid), ("t", t_grid)] {
        if g.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain(format!("{name} grid must be strictly increasing")));
        }
    }
    let values = map_replicates(r_grid.len() as u64, workers, |i| {
        let r = r_grid[i as usize];
        t_grid.iter().map(|&t| rate_point(law, r, t)).collect()
    });
    Ok(RateSurface { law: law.to_string(), r_grid: r_grid.to_vec(), t_grid: t_grid.to_vec(), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::{coverage_p, theta};

    fn law(s: &str) -> CapitalLaw {
        CapitalLaw::parse(s).unwrap()
    }

    #[test]
    fn rho_examples() {
        for t in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let r = -(-t as f64).exp_m1();
            assert!((rho(r, t).unwrap() - 1.0).abs() < 1e-10, "t = {t}");
        }
        assert_eq!(rho(0.7, 0.7).unwrap(), 0.0);
        let x = rho(0.3, 1.0).unwrap();
        assert!(rho_residual(0.3, 1.0, x) < 1e-12);
        assert!(rho(0.0, 1.0).is_err());
        assert!(rho(1.1, 1.0).is_err());
    }

    #[test]
    fn j_examples() {
        for t in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let r = -(-t as f64).exp_m1();
            assert!(coupon_rate_j(t, r).abs() < 1e-10, "t = {t}");
        }
        for t in [0.2, 0.5, 1.0] {
            let expected = xlogx(1.0 - t) + t;
            assert_eq!(coupon_rate_j(t, t), expected);
        }
        assert_eq!(coupon_rate_j(1.0, 0.0), f64::INFINITY);
        assert_eq!(coupon_rate_j(2.0, 1.5), f64::INFINITY);
        assert!(coupon_rate_j(3.0, 1.0).is_finite());
    }

    #[test]
    fn j_is_continuous_at_the_diagonal() {
        let t = 0.6;
        let near = coupon_rate_j(t, t - 1e-9);
        assert!((near - coupon_rate_j(t, t)).abs() < 1e-6);
    }

    #[test]
    fn f_examples() {
        let l = law("poisson:1.4998");
        let p = coverage_p(&l);
        let th = theta(&l);
        assert!(composite_rate_f(&l, p, th).unwrap().f < 1e-6);
        assert!(composite_rate_f(&l, 0.5827, 0.8740).unwrap().f < 1e-6);
        assert_eq!(composite_rate_f(&l, 0.0, 0.0).unwrap().f, 0.0);
        assert_eq!(composite_rate_f(&l, 0.0, 0.5).unwrap().f, f64::INFINITY);
        assert!(matches!(composite_rate_f(&law("ptail:1:0.5"), 0.5, 1.0), Err(Error::NoExponentialMoment(_))));
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_of_s(0.0), 1.0);
        assert!((lambda_of_s(1e-8) - (1.0 + 5e-9)).abs() < 1e-15);
        assert!((lambda_of_s(100.0) - 100.0).abs() < 1e-10);
        let s = 1e-6;
        assert!((lambda_of_s(s * 0.999_999) - lambda_of_s(s)).abs() < 1e-12);
    }

    #[test]
    fn decay_closed_forms() {
        assert!((decay_rate(&law("const:1")).unwrap() - 1.0).abs() < 1e-12);
        let b = decay_rate(&law("bernoulli:0.6")).unwrap();
        assert!((b - (1.0 - 0.6f64.ln())).abs() < 1e-9, "{b}");
        assert!((b - 1.51083).abs() < 1e-5);
        assert_eq!(decay_rate(&law("const:0")).unwrap(), f64::INFINITY);
        assert!(decay_rate(&law("ptail:1:2")).is_err());
    }

    #[test]
    fn decay_positive_for_supercritical() {
        for s in ["const:2", "poisson:1.4998", "pmf:0:0.3,2:0.7", "geom:0.6"] {
            let (v, arg) = decay_rate_argmin(&law(s)).unwrap();
            assert!(v > 0.0 && v.is_finite(), "{s}: {v}");
            assert!(arg >= 0.0);
        }
    }

    #[test]
    fn g_examples() {
        let l = law("poisson:1.4998");
        assert_eq!(contracted_rate_g(&l, 0.0).unwrap(), 0.0);
        assert_eq!(contracted_rate_g(&l, 1.2).unwrap(), f64::INFINITY);
        let d = decay_rate(&l).unwrap();
        assert!((contracted_rate_g(&l, 1.0).unwrap() - d).abs() < 1e-9);
        let g = contracted_rate_g(&l, coverage_p(&l)).unwrap();
        assert!(g.abs() < 1e-6, "{g}");
    }

    #[test]
    fn path_examples() {
        let (r, t) = (0.4, 1.3);
        assert_eq!(optimal_coupon_path(r, t, 0.0).unwrap(), 0.0);
        assert!((optimal_coupon_path(r, t, t).unwrap() - r).abs() < 1e-10);
        let t = 1.5f64;
        let r = -(-t).exp_m1();
        for s in [0.1, 0.7, 1.5] {
            assert!((optimal_coupon_path(r, t, s).unwrap() + (-s as f64).exp_m1()).abs() < 1e-9);
        }
        assert!(optimal_coupon_path(0.5, 0.5, 0.1).is_err());
        assert!(optimal_coupon_path(0.2, 0.5, 0.6).is_err());
    }

    #[test]
    fn surface_examples() {
        let l = law("poisson:1.4998");
        let s = rate_surface(&l, &[0.05, 0.5827, 0.7], &[0.06, 0.8740, 2.0], 1).unwrap();
        assert!(s.get(1, 1).f < 1e-6);
        assert!(s.get(0, 0).f > 0.0);
        let csv = s.to_csv();
        assert!(csv.starts_with("r,t,rho,J,I_component,F\n"));
        assert_eq!(csv.lines().count(), 10);
        assert!(rate_surface(&l, &[0.5, 0.4], &[1.0], 1).is_err());

        let b = law("pmf:0:0.3,2:0.7");
        let out = rate_surface(&b, &[0.2], &[0.41], 1).unwrap();
        assert_eq!(out.get(0, 0).f, f64::INFINITY);
        assert!(out.to_csv().lines().nth(1).unwrap().ends_with(",inf"));
    }

    #[test]
    fn surface_is_unbounded_near_origin() {
        let l = law("poisson:1.4998");
        // Both terms grow like t ln(1/r) as r -> 0 with t fixed.
        let p = composite_rate_f(&l, 1e-30, 0.1).unwrap();
        assert!(p.f > 10.0, "{}", p.f);
        assert!(rho_residual(p.r, p.t, p.rho) < 1e-12);
    }
}
