//! The `n`-coupon collector: success epochs, counting function, and the
//! variance and Gumbel normalizations used by the limit theorems.
//!
//! With `i` coupons already collected, each draw fails with probability
//! `i/n`, so the wait `Delta_i` for coupon `i + 1` is geometric on
//! `{1, 2, ...}` with success probability `1 - i/n`. Epochs are stored in a
//! dense `Vec<u64>` (8 bytes per coupon).

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::open_unit;

/// Geometric variable on `{1, 2, ...}` with failure probability `fail`,
/// sampled by inversion: `max(1, ceil(ln U / ln fail))`.
pub fn geometric_gap<R: Rng + ?Sized>(fail: f64, rng: &mut R) -> u64 {
    if fail <= 0.0 {
        return 1;
    }
    if fail >= 1.0 {
        return u64::MAX;
    }
    let x = (open_unit(rng).ln() / fail.ln()).ceil();
    if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        (x as u64).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CouponTrajectory {
    n: u64,
    epochs: Vec<u64>,
}

impl CouponTrajectory {
    pub fn sample<R: Rng + ?Sized>(n: u64, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("coupon collector needs n >= 1".into()));
        }
        let mut epochs = Vec::with_capacity(n as usize);
        let mut t = 0u64;
        epochs.push(t);
        for i in 1..n {
            t = t.saturating_add(geometric_gap(i as f64 / n as f64, rng));
            epochs.push(t);
        }
        Ok(Self { n, epochs })
    }

    /// Builds a trajectory from explicit epochs, which must start at 0 and
    /// increase strictly.
    pub fn from_epochs(epochs: Vec<u64>) -> Result<Self> {
        if epochs.first() != Some(&0) {
            return Err(Error::Domain("epochs must start at 0".into()));
        }
        if epochs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("epochs must be strictly increasing".into()));
        }
        Ok(Self { n: epochs.len() as u64, epochs })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn epochs(&self) -> &[u64] {
        &self.epochs
    }

    /// `N_n(t)`: number of coupons collected by time `t`.
    pub fn count_at(&self, t: u64) -> u64 {
        self.epochs.partition_point(|&e| e <= t) as u64
    }

    pub fn completion_time(&self) -> u64 {
        *self.epochs.last().unwrap()
    }

    /// `(T_{n,n} - n ln n) / n`.
    pub fn gumbel_statistic(&self) -> Result<f64> {
        gumbel_statistic(self.n, self.completion_time())
    }
}

/// `(t - n ln n) / n` for a completion time `t`.
pub fn gumbel_statistic(n: u64, completion: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain("gumbel statistic needs n >= 2".into()));
    }
    let nf = n as f64;
    Ok((completion as f64 - nf * nf.ln()) / nf)
}

/// `T_{n,n}` alone, without storing the epochs.
pub fn sample_completion_time<R: Rng + ?Sized>(n: u64, rng: &mut R) -> u64 {
    (1..n).fold(0u64, |t, i| t.saturating_add(geometric_gap(i as f64 / n as f64, rng)))
}

/// `sigma_T(q)^2 = q/(1-q) + ln(1-q)`.
pub fn sigma_t_sq(q: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain(format!("sigma_T needs q in [0, 1), got {q}")));
    }
    Ok(q / (1.0 - q) + (-q).ln_1p())
}

/// `sigma_N(s)^2 = e^-s (1 - e^-s) - s e^-2s`.
pub fn sigma_n_sq(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("sigma_N needs s >= 0, got {s}")));
    }
    let e = (-s).exp();
    Ok(-e * (-s).exp_m1() - s * e * e)
}
