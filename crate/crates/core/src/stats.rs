//! Summary statistics and goodness-of-fit distances.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("positive sd").cdf(x)
}

pub fn gumbel_cdf(x: f64) -> f64 {
    (-(-x).exp()).exp()
}

/// Kolmogorov-Smirnov distance between the empirical law of `xs` and a
/// continuous `cdf`.
pub fn ks_distance(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// KS distance for samples supported on a lattice `x0 + h Z`. The
/// empirical CDF at each atom `x` is compared with `cdf(x + h/2)`, and just
/// below the atom with `cdf(x - h/2)`, the usual continuity correction.
pub fn ks_distance_lattice(xs: &[f64], h: f64, cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / n - cdf(x - 0.5 * h)).abs());
        d = d.max((j as f64 / n - cdf(x + 0.5 * h)).abs());
        i = j;
    }
    d
}

/// Greatest common divisor of the pairwise differences of `values`, or 0
/// when all values coincide.
pub fn lattice_span(values: &[u64]) -> u64 {
    let Some(&base) = values.iter().min() else { return 0 };
    values.iter().fold(0u64, |g, &v| gcd(g, v - base))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn counts<K: Ord + Clone>(values: impl IntoIterator<Item = K>) -> BTreeMap<K, u64> {
    let mut map = BTreeMap::new();
    for v in values {
        *map.entry(v).or_insert(0) += 1;
    }
    map
}

/// Total variation distance between the empirical laws of two samples.
pub fn total_variation<K: Ord + Clone>(a: &[K], b: &[K]) -> f64 {
    let ca = counts(a.iter().cloned());
    let cb = counts(b.iter().cloned());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let keys: std::collections::BTreeSet<&K> = ca.keys().chain(cb.keys()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| {
            let pa = ca.get(k).copied().unwrap_or(0) as f64 / na;
            let pb = cb.get(k).copied().unwrap_or(0) as f64 / nb;
            (pa - pb).abs()
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
    pub cells: usize,
}

impl ChiSquare {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

fn p_value(statistic: f64, dof: u64) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64).expect("dof > 0").sf(statistic)
}

/// Pearson goodness of fit of observed counts against cell probabilities.
/// Cells with expected count below 5 are pooled into one cell; if that pool
/// still expects fewer than 5 it absorbs the smallest remaining cell. Any
/// observation outside the support of `probs` makes the statistic infinite.
pub fn chi_square_gof<K: Ord + Clone>(observed: &BTreeMap<K, u64>, probs: &BTreeMap<K, f64>) -> ChiSquare {
    let total = observed.values().sum::<u64>() as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pool = (0.0, 0.0);
    for (k, &p) in probs {
        let o = observed.get(k).copied().unwrap_or(0) as f64;
        let e = p * total;
        if e < 5.0 {
            pool.0 += o;
            pool.1 += e;
        } else {
            cells.push((o, e));
        }
    }
    let outside: u64 = observed.iter().filter(|(k, _)| !probs.contains_key(k)).map(|(_, &o)| o).sum();
    if pool.0 > 0.0 || pool.1 > 0.0 {
        if pool.1 < 5.0 && !cells.is_empty() {
            let (i, _) = cells
                .iter()
                .enumerate()
                .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
                .unwrap();
            let c = cells.swap_remove(i);
            pool.0 += c.0;
            pool.1 += c.1;
        }
        cells.push(pool);
    }
    let statistic = if outside > 0 {
        f64::INFINITY
    } else {
        cells
            .iter()
            .map(|&(o, e)| if e > 0.0 { (o - e) * (o - e) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
            .sum::<f64>()
    };
    let dof = cells.len().saturating_sub(1) as u64;
    ChiSquare { statistic, dof, p_value: p_value(statistic, dof), cells: cells.len() }
}

/// Two-sample chi-square homogeneity test. Cells with fewer than 10
/// combined observations are pooled.
pub fn chi_square_two_sample<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> ChiSquare {
    let (na, nb) = (a.values().sum::<u64>() as f64, b.values().sum::<u64>() as f64);
    let keys: std::collections::BTreeSet<&K> = a.keys().chain(b.keys()).collect();
    let mut cells = Vec::new();
    let mut pool = (0.0, 0.0);
    for k in keys {
        let x = a.get(k).copied().unwrap_or(0) as f64;
        let y = b.get(k).copied().unwrap_or(0) as f64;
        if x + y < 10.0 {
            pool.0 += x;
            pool.1 += y;
        } else {
            cells.push((x, y));
        }
    }
    if pool.0 + pool.1 > 0.0 {
        cells.push(pool);
    }
    let (ra, rb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let statistic = cells
        .iter()
        .map(|&(x, y)| (ra * x - rb * y).powi(2) / (x + y))
        .sum::<f64>();
    let dof = cells.len().saturating_sub(1) as u64;
    ChiSquare { statistic, dof, p_value: p_value(statistic, dof), cells: cells.len() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_variance() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ks_of_uniform_grid() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12);
    }

    #[test]
    fn lattice_span_and_ks() {
        assert_eq!(lattice_span(&[4, 8, 10, 6]), 2);
        assert_eq!(lattice_span(&[3, 3]), 0);
        // A fair coin on {0, 1} against the N(0.5, 0.5^2) cdf, corrected at +-1/2.
        let xs = [0.0, 1.0, 0.0, 1.0];
        let cdf = |x: f64| normal_cdf(x, 0.5, 0.5);
        let d = ks_distance_lattice(&xs, 1.0, cdf);
        assert!((d - (cdf(0.5) - 0.5).abs().max(cdf(-0.5))).abs() < 1e-15);
    }

    #[test]
    fn tv_examples() {
        assert_eq!(total_variation(&[1, 1, 2, 2], &[1, 2, 1, 2]), 0.0);
        assert_eq!(total_variation(&[1, 1], &[2, 2]), 1.0);
        assert!((total_variation(&[1, 1, 1, 2], &[1, 2, 2, 2]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gof_exact_match_passes() {
        let probs: BTreeMap<u32, f64> = [(0, 0.25), (1, 0.5), (2, 0.25)].into_iter().collect();
        let obs: BTreeMap<u32, u64> = [(0, 250), (1, 500), (2, 250)].into_iter().collect();
        let r = chi_square_gof(&obs, &probs);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 2);
        assert!(r.passes(0.001));
    }

    #[test]
    fn gof_rejects_unsupported_mass() {
        let probs: BTreeMap<u32, f64> = [(0, 0.5), (1, 0.5)].into_iter().collect();
        let obs: BTreeMap<u32, u64> = [(0, 450), (1, 450), (7, 100)].into_iter().collect();
        assert!(!chi_square_gof(&obs, &probs).passes(0.001));
    }

    #[test]
    fn gof_p_value_matches_table() {
        // chi2 with 1 dof: P(X > 3.841459) = 0.05.
        let probs: BTreeMap<u32, f64> = [(0, 0.5), (1, 0.5)].into_iter().collect();
        let obs: BTreeMap<u32, u64> = [(0, 5098), (1, 4902)].into_iter().collect();
        let r = chi_square_gof(&obs, &probs);
        assert!((r.statistic - 3.8416).abs() < 1e-9);
        assert!((r.p_value - 0.05).abs() < 1e-4);
    }

    #[test]
    fn two_sample_identical_passes() {
        let a: BTreeMap<u32, u64> = [(0, 300), (1, 700)].into_iter().collect();
        let r = chi_square_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        let b: BTreeMap<u32, u64> = [(0, 700), (1, 300)].into_iter().collect();
        assert!(!chi_square_two_sample(&a, &b).passes(0.001));
    }

    #[test]
    fn gumbel_cdf_values() {
        assert!((gumbel_cdf(0.0) - (-1f64).exp()).abs() < 1e-15);
        assert!(gumbel_cdf(-10.0) < 1e-9);
    }
}
