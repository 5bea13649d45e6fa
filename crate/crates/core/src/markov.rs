//! Direct simulation of the transmission chain `(N(t), S(t))`.
//!
//! `N` counts informed servers and `S` is their pooled remaining capital.
//! Start from `N = 1`, `S ~ mu`. Each step one unit of capital is spent on
//! a uniformly random target: with probability `N/n` it hits an informed
//! server and `S -= 1`; otherwise a new server is informed, `N += 1` and
//! `S += K - 1` for a fresh `K ~ mu`. The chain stops at the first `t` with
//! `S = 0`, which is `tau`.
//!
//! Since `S(t) = R(N(t)) - t` with `R` the total capital revealed so far,
//! `tau` always equals the revealed capital.

use rand::Rng;
use serde::Serialize;

use crate::batch::map_replicates;
use crate::error::{Error, Result};
use crate::law::CapitalLaw;
use crate::rng::{replicate_seed, stream};

pub const TRACE_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: u64,
    pub law: CapitalLaw,
    pub seed: u64,
    pub record_trace: bool,
}

impl SimConfig {
    pub fn new(n: u64, law: CapitalLaw, seed: u64) -> Self {
        Self { n, law, seed, record_trace: false }
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TracePoint {
    pub t: u64,
    pub informed: u64,
    pub capital: u64,
    pub revealed: u64,
}

/// Trace with at most [`TRACE_CAP`] points. When full, every other point is
/// dropped and the sampling stride doubles, so the kept points stay evenly
/// spaced in `t`.
#[derive(Debug, Clone, Default)]
pub(crate) struct TraceRecorder {
    points: Vec<TracePoint>,
    stride: u64,
}

impl TraceRecorder {
    pub(crate) fn new() -> Self {
        Self { points: Vec::new(), stride: 1 }
    }

    pub(crate) fn record(&mut self, p: TracePoint) {
        if p.t % self.stride != 0 {
            return;
        }
        if self.points.len() == TRACE_CAP {
            let mut i = 0;
            self.points.retain(|_| {
                i += 1;
                i % 2 == 1
            });
            self.stride *= 2;
            if p.t % self.stride != 0 {
                return;
            }
        }
        self.points.push(p);
    }

    pub(crate) fn finish(mut self, last: TracePoint) -> Vec<TracePoint> {
        if self.points.last().map(|p| p.t) != Some(last.t) {
            self.points.push(last);
        }
        self.points
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutcome {
    pub tau: u64,
    pub informed: u64,
    pub full_transmission: bool,
    pub capital_sum_revealed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TracePoint>>,
}

impl SimOutcome {
    /// Finite-`n` stand-in for survival of the tree: `tau >= eps * n`.
    pub fn survived_proxy(&self, n: u64, eps: f64) -> bool {
        self.tau as f64 >= eps * n as f64
    }
}

pub fn run_markov(config: &SimConfig) -> Result<SimOutcome> {
    config.validate()?;
    Ok(run_markov_with(config.n, &config.law, config.record_trace, &mut stream(config.seed)))
}

pub fn run_markov_with<R: Rng + ?Sized>(n: u64, law: &CapitalLaw, record_trace: bool, rng: &mut R) -> SimOutcome {
    let mut informed = 1u64;
    let mut revealed = law.sample(rng);
    let mut s = revealed;
    let mut t = 0u64;
    let mut trace = record_trace.then(TraceRecorder::new);
    let point = |t, informed, s, revealed| TracePoint { t, informed, capital: s, revealed };

    if let Some(tr) = trace.as_mut() {
        tr.record(point(t, informed, s, revealed));
    }
    while s > 0 {
        if informed == n {
            // Every remaining emission hits an informed server.
            t = t.saturating_add(s);
            s = 0;
            break;
        }
        if rng.gen_range(0..n) < informed {
            s -= 1;
        } else {
            let k = law.sample(rng);
            informed += 1;
            revealed = revealed.saturating_add(k);
            s = (s - 1).saturating_add(k);
        }
        t += 1;
        if let Some(tr) = trace.as_mut() {
            tr.record(point(t, informed, s, revealed));
        }
    }

    SimOutcome {
        tau: t,
        informed,
        full_transmission: informed == n,
        capital_sum_revealed: revealed,
        trace: trace.map(|tr| tr.finish(point(t, informed, s, revealed))),
    }
}

/// `reps` independent replicates; replicate `r` is seeded with
/// `replicate_seed(config.seed, r)`. The result does not depend on `workers`.
pub fn run_batch(config: &SimConfig, reps: u64, workers: usize) -> Result<Vec<SimOutcome>> {
    config.validate()?;
    if reps == 0 {
        return Err(Error::Domain("reps must be at least 1".into()));
    }
    Ok(map_replicates(reps, workers, |r| {
        run_markov_with(config.n, &config.law, config.record_trace, &mut stream(replicate_seed(config.seed, r)))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(law: &str, n: u64, seed: u64) -> SimConfig {
        SimConfig::new(n, CapitalLaw::parse(law).unwrap(), seed)
    }

    #[test]
    fn zero_capital_stops_immediately() {
        for n in [1, 2, 50] {
            let out = run_markov(&config("const:0", n, 1)).unwrap();
            assert_eq!((out.tau, out.informed), (0, 1));
            assert_eq!(out.full_transmission, n == 1);
        }
    }

    #[test]
    fn unit_capital_full_transmission_rate() {
        let reps = 1_000_000u64;
        let outs = run_batch(&config("const:1", 4, 17), reps, 0).unwrap();
        let hits = outs.iter().filter(|o| o.full_transmission).count() as f64;
        let p = 0.09375;
        let sd = (p * (1.0 - p) * reps as f64).sqrt();
        assert!((hits - p * reps as f64).abs() < 3.0 * sd, "{hits}");
    }

    #[test]
    fn trace_identity_holds() {
        for law in ["const:2", "poisson:1.4998", "pmf:0:0.3,2:0.7"] {
            for seed in 0..20 {
                let out = run_markov(&config(law, 200, seed).with_trace()).unwrap();
                let trace = out.trace.as_ref().unwrap();
                assert_eq!(trace[0].t, 0);
                for p in trace {
                    assert_eq!(p.capital + p.t, p.revealed);
                }
                for w in trace.windows(2) {
                    assert!(w[1].informed >= w[0].informed);
                }
                let last = trace.last().unwrap();
                assert_eq!((last.t, last.capital), (out.tau, 0));
                assert_eq!(out.tau, out.capital_sum_revealed);
            }
        }
    }

    #[test]
    fn trace_is_decimated() {
        let out = run_markov(&config("const:3", 400_000, 3).with_trace()).unwrap();
        let trace = out.trace.unwrap();
        assert!(out.tau > TRACE_CAP as u64);
        assert!(trace.len() <= TRACE_CAP + 1);
        let stride = trace[1].t - trace[0].t;
        assert!(stride > 1);
        assert!(trace.windows(2).rev().skip(1).all(|w| w[1].t - w[0].t == stride));
    }

    #[test]
    fn batch_is_deterministic_across_workers() {
        let cfg = config("poisson:1.4998", 300, 99);
        let a = run_batch(&cfg, 64, 1).unwrap();
        let b = run_batch(&cfg, 64, 8).unwrap();
        let c = run_batch(&cfg, 64, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn invalid_config() {
        assert!(run_markov(&config("const:1", 0, 0)).is_err());
        assert!(run_batch(&config("const:1", 3, 0), 0, 1).is_err());
    }
}
