//! Transmission realized as a pruned Galton-Watson tree.
//!
//! Nodes of the tree are browsed in (length, lexicographic) order. The
//! `t`-th browsed node is kept (becomes informed and reveals its `K`
//! children) exactly when `t` is a success epoch of an independent coupon
//! collector; otherwise it is discarded as failed. The standby set is the
//! set of revealed but not yet browsed nodes, so its size plays the role of
//! `S`, and the informed set size plays the role of `N`.
//!
//! Children of the current minimal node are larger than every pending node,
//! so the ordered standby set behaves as a FIFO queue. The queue holds
//! ranges of sibling ranks rather than individual nodes, which keeps huge
//! capitals cheap. Informed nodes live in a flat arena as
//! `(parent index, child rank)`.
//!
//! Between two success epochs all browsed nodes fail, so the engine jumps
//! from epoch to epoch and costs `O(N(tau))` rather than `O(tau)`.

use std::collections::VecDeque;

use rand::Rng;
use serde::Serialize;

use crate::batch::map_replicates;
use crate::coupon::geometric_gap;
use crate::error::{Error, Result};
use crate::law::CapitalLaw;
use crate::markov::{SimConfig, SimOutcome, TracePoint, TraceRecorder};
use crate::rng::{experiment_seed, replicate_seed, stream};
use crate::stats::total_variation;

const ROOT: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrunedRunOutcome {
    #[serde(flatten)]
    pub outcome: SimOutcome,
    pub failed_count: u64,
}

impl PrunedRunOutcome {
    /// `|informed set|` at each recorded step.
    pub fn informed_set_size_history(&self) -> Option<Vec<u64>> {
        self.outcome.trace.as_ref().map(|tr| tr.iter().map(|p| p.informed).collect())
    }

    /// `|standby set|` at each recorded step.
    pub fn standby_size_history(&self) -> Option<Vec<u64>> {
        self.outcome.trace.as_ref().map(|tr| tr.iter().map(|p| p.capital).collect())
    }
}

/// A browsed node: the arena index of its parent and its rank among
/// siblings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Visit {
    pub parent: usize,
    pub rank: u64,
    /// Number of children revealed, or `None` if the node failed.
    pub children: Option<u64>,
}

/// Every browse step of one run, for checking the browsing order.
#[derive(Debug, Clone, Default)]
pub struct BrowseLog {
    pub root_children: u64,
    pub visits: Vec<Visit>,
    /// `(parent, rank)` of each informed node; index 0 is the root.
    pub arena: Vec<(usize, u64)>,
}

impl BrowseLog {
    /// Word of child ranks from the root down to arena node `idx`.
    pub fn word(&self, idx: usize) -> Vec<u64> {
        let mut word = Vec::new();
        let mut cur = idx;
        while cur != 0 {
            let (parent, rank) = self.arena[cur];
            word.push(rank);
            cur = parent;
        }
        word.reverse();
        word
    }

    pub fn visit_word(&self, v: &Visit) -> Vec<u64> {
        let mut w = self.word(v.parent);
        w.push(v.rank);
        w
    }
}

#[derive(Debug, Clone, Copy)]
struct Siblings {
    parent: usize,
    next: u64,
    end: u64,
}

struct Standby {
    queue: VecDeque<Siblings>,
    size: u64,
}

impl Standby {
    fn new() -> Self {
        Self { queue: VecDeque::new(), size: 0 }
    }

    fn push(&mut self, parent: usize, count: u64) {
        if count > 0 {
            self.queue.push_back(Siblings { parent, next: 0, end: count });
            self.size = self.size.saturating_add(count);
        }
    }

    fn pop(&mut self) -> (usize, u64) {
        let front = self.queue.front_mut().expect("standby not empty");
        let node = (front.parent, front.next);
        front.next += 1;
        if front.next == front.end {
            self.queue.pop_front();
        }
        self.size -= 1;
        node
    }

    /// Discards the `count` smallest nodes.
    fn drop_front(&mut self, mut count: u64) {
        self.size -= count;
        while count > 0 {
            let front = self.queue.front_mut().expect("standby not empty");
            let left = front.end - front.next;
            if left <= count {
                count -= left;
                self.queue.pop_front();
            } else {
                front.next += count;
                count = 0;
            }
        }
    }
}

pub fn run_coupled(config: &SimConfig) -> Result<PrunedRunOutcome> {
    config.validate()?;
    let mut rng = stream(config.seed);
    if config.record_trace {
        Ok(run_stepwise(config.n, &config.law, &mut rng, None))
    } else {
        Ok(run_coupled_with(config.n, &config.law, &mut rng))
    }
}

/// Like [`run_coupled`] with a trace, and also returns the full browse log.
pub fn run_coupled_logged(config: &SimConfig) -> Result<(PrunedRunOutcome, BrowseLog)> {
    config.validate()?;
    let mut log = BrowseLog::default();
    let out = run_stepwise(config.n, &config.law, &mut stream(config.seed), Some(&mut log));
    Ok((out, log))
}

/// Epoch-driven run without trace.
pub fn run_coupled_with<R: Rng + ?Sized>(n: u64, law: &CapitalLaw, rng: &mut R) -> PrunedRunOutcome {
    let root_k = law.sample(rng);
    let mut revealed = root_k;
    let mut informed = 1u64;
    let mut failed = 0u64;
    let mut t = 0u64;
    let mut standby = Standby::new();
    let mut next_parent = 1usize;
    standby.push(0, root_k);

    while standby.size > 0 {
        if informed == n {
            failed += standby.size;
            t = t.saturating_add(standby.size);
            break;
        }
        let gap = geometric_gap(informed as f64 / n as f64, rng);
        if gap - 1 >= standby.size {
            failed += standby.size;
            t = t.saturating_add(standby.size);
            break;
        }
        standby.drop_front(gap - 1);
        failed += gap - 1;
        standby.pop();
        let k = law.sample(rng);
        standby.push(next_parent, k);
        next_parent += 1;
        informed += 1;
        revealed = revealed.saturating_add(k);
        t += gap;
    }

    PrunedRunOutcome {
        outcome: SimOutcome {
            tau: t,
            informed,
            full_transmission: informed == n,
            capital_sum_revealed: revealed,
            trace: None,
        },
        failed_count: failed,
    }
}

fn run_stepwise<R: Rng + ?Sized>(
    n: u64,
    law: &CapitalLaw,
    rng: &mut R,
    mut log: Option<&mut BrowseLog>,
) -> PrunedRunOutcome {
    let root_k = law.sample(rng);
    let mut revealed = root_k;
    let mut informed = 1u64;
    let mut failed = 0u64;
    let mut t = 0u64;
    let mut standby = Standby::new();
    standby.push(0, root_k);
    let mut arena_len = 1usize;
    if let Some(log) = log.as_deref_mut() {
        log.root_children = root_k;
        log.arena.push((ROOT, 0));
    }
    let mut trace = TraceRecorder::new();
    let point = |t, informed, s, revealed| TracePoint { t, informed, capital: s, revealed };
    trace.record(point(0, 1, standby.size, revealed));

    let draw_gap = |informed: u64, rng: &mut R| {
        if informed == n {
            u64::MAX
        } else {
            geometric_gap(informed as f64 / n as f64, rng)
        }
    };
    let mut until_success = draw_gap(informed, rng);

    while standby.size > 0 {
        let (parent, rank) = standby.pop();
        t += 1;
        until_success -= 1;
        let children = if until_success == 0 {
            let k = law.sample(rng);
            standby.push(arena_len, k);
            arena_len += 1;
            informed += 1;
            revealed = revealed.saturating_add(k);
            until_success = draw_gap(informed, rng);
            Some(k)
        } else {
            failed += 1;
            None
        };
        if let Some(log) = log.as_deref_mut() {
            log.visits.push(Visit { parent, rank, children });
            if children.is_some() {
                log.arena.push((parent, rank));
            }
        }
        trace.record(point(t, informed, standby.size, revealed));
    }

    PrunedRunOutcome {
        outcome: SimOutcome {
            tau: t,
            informed,
            full_transmission: informed == n,
            capital_sum_revealed: revealed,
            trace: Some(trace.finish(point(t, informed, 0, revealed))),
        },
        failed_count: failed,
    }
}

pub fn run_coupled_batch(config: &SimConfig, reps: u64, workers: usize) -> Result<Vec<PrunedRunOutcome>> {
    config.validate()?;
    if reps == 0 {
        return Err(Error::Domain("reps must be at least 1".into()));
    }
    Ok(map_replicates(reps, workers, |r| {
        let mut rng = stream(replicate_seed(config.seed, r));
        if config.record_trace {
            run_stepwise(config.n, &config.law, &mut rng, None)
        } else {
            run_coupled_with(config.n, &config.law, &mut rng)
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Progeny {
    Exact(u64),
    Exceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ProgenySample {
    pub progeny: Progeny,
    pub survived_proxy: bool,
}

/// Total progeny of an unpruned tree, grown breadth-first. Stops as soon as
/// the number of discovered nodes exceeds `cap`, so `Exact(z)` always has
/// `z <= cap`.
pub fn gw_progeny_sample<R: Rng + ?Sized>(law: &CapitalLaw, cap: u64, rng: &mut R) -> Result<ProgenySample> {
    if cap == 0 {
        return Err(Error::Domain("cap must be at least 1".into()));
    }
    let mut expanded = 1u64;
    let mut pending = law.sample(rng);
    loop {
        if expanded.saturating_add(pending) > cap {
            return Ok(ProgenySample { progeny: Progeny::Exceeded, survived_proxy: true });
        }
        if pending == 0 {
            return Ok(ProgenySample { progeny: Progeny::Exact(expanded), survived_proxy: false });
        }
        pending = pending - 1 + law.sample(rng);
        expanded += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubcriticalReport {
    pub law: String,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub cap: u64,
    /// TV distance between the laws of `tau + 1` and the total progeny.
    pub tv_tau_plus_one: f64,
    /// TV distance between the laws of `N(tau)` and the total progeny.
    pub tv_informed: f64,
    pub mean_tau_plus_one: f64,
    pub mean_informed: f64,
    pub mean_progeny: f64,
    pub progeny_exceeded: u64,
}

/// Compares `tau + 1` and `N(tau)` from the coupled engine with the total
/// progeny of an unpruned tree, on independent streams. Values above
/// `cap = 10 n` share one overflow bin.
pub fn subcritical_equivalence_check(
    law: &CapitalLaw,
    n: u64,
    reps: u64,
    seed: u64,
    workers: usize,
) -> Result<SubcriticalReport> {
    if law.mean() > 1.0 || law.pmf(1) >= 1.0 {
        return Err(Error::Precondition(format!("{law} is not subcritical (need E K <= 1 and P(K = 1) < 1)")));
    }
    let cap = n.saturating_mul(10);
    let engine = SimConfig::new(n, law.clone(), experiment_seed(seed, "subcritical/engine"));
    let runs = run_coupled_batch(&engine, reps, workers)?;
    let progeny_seed = experiment_seed(seed, "subcritical/progeny");
    let progeny: Vec<ProgenySample> = map_replicates(reps, workers, |r| {
        gw_progeny_sample(law, cap, &mut stream(replicate_seed(progeny_seed, r))).expect("cap >= 1")
    });

    let bin = |v: u64| v.min(cap + 1);
    let tau1: Vec<u64> = runs.iter().map(|o| bin(o.outcome.tau + 1)).collect();
    let informed: Vec<u64> = runs.iter().map(|o| bin(o.outcome.informed)).collect();
    let z: Vec<u64> = progeny
        .iter()
        .map(|p| match p.progeny {
            Progeny::Exact(v) => v,
            Progeny::Exceeded => cap + 1,
        })
        .collect();
    let mean = |v: &[u64]| v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64;

    Ok(SubcriticalReport {
        law: law.to_string(),
        n,
        reps,
        seed,
        cap,
        tv_tau_plus_one: total_variation(&tau1, &z),
        tv_informed: total_variation(&informed, &z),
        mean_tau_plus_one: mean(&tau1),
        mean_informed: mean(&informed),
        mean_progeny: mean(&z),
        progeny_exceeded: progeny.iter().filter(|p| p.survived_proxy).count() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn config(law: &str, n: u64, seed: u64) -> SimConfig {
        SimConfig::new(n, CapitalLaw::parse(law).unwrap(), seed)
    }

    #[test]
    fn zero_capital() {
        let out = run_coupled(&config("const:0", 10, 0)).unwrap();
        assert_eq!((out.outcome.tau, out.outcome.informed, out.failed_count), (0, 1, 0));
    }

    #[test]
    fn epoch_and_stepwise_agree_in_mean() {
        // Different random consumption, same law: compare means loosely.
        let cfg = config("poisson:1.4998", 500, 8);
        let fast = run_coupled_batch(&cfg, 4000, 1).unwrap();
        let slow = run_coupled_batch(&cfg.clone().with_trace(), 4000, 1).unwrap();
        let m = |v: &[PrunedRunOutcome]| v.iter().map(|o| o.outcome.informed as f64).sum::<f64>() / v.len() as f64;
        assert!((m(&fast) - m(&slow)).abs() < 20.0, "{} {}", m(&fast), m(&slow));
    }

    #[test]
    fn cardinalities_mirror_the_chain() {
        for seed in 0..30 {
            let out = run_coupled(&config("pmf:0:0.3,2:0.7", 100, seed).with_trace()).unwrap();
            let trace = out.outcome.trace.as_ref().unwrap();
            for p in trace {
                assert_eq!(p.capital + p.t, p.revealed);
            }
            for w in trace.windows(2) {
                let dn = w[1].informed - w[0].informed;
                assert!(dn <= 1);
                if dn == 0 {
                    assert_eq!(w[1].capital + 1, w[0].capital);
                }
            }
            assert_eq!(out.outcome.tau, out.outcome.capital_sum_revealed);
            assert_eq!(out.outcome.tau, out.outcome.informed - 1 + out.failed_count);
        }
    }

    #[test]
    fn fifo_matches_length_lex_order() {
        for seed in 0..1000 {
            let (out, log) = run_coupled_logged(&config("pmf:0:0.3,1:0.2,2:0.3,3:0.2", 12, seed)).unwrap();
            let mut ordered: BTreeSet<(usize, Vec<u64>)> = (0..log.root_children).map(|r| (1, vec![r])).collect();
            let mut informed_idx = 1;
            for visit in &log.visits {
                let (len, word) = ordered.pop_first().unwrap();
                assert_eq!(word, log.visit_word(visit), "seed {seed}");
                if let Some(k) = visit.children {
                    assert_eq!(log.word(informed_idx), word);
                    for r in 0..k {
                        let mut child = word.clone();
                        child.push(r);
                        ordered.insert((len + 1, child));
                    }
                    informed_idx += 1;
                }
            }
            assert!(ordered.is_empty());
            assert_eq!(log.visits.len() as u64, out.outcome.tau);
        }
    }

    #[test]
    fn progeny_examples() {
        let mut rng = stream(4);
        let zero = CapitalLaw::constant(0);
        assert_eq!(gw_progeny_sample(&zero, 1, &mut rng).unwrap().progeny, Progeny::Exact(1));
        let two = CapitalLaw::constant(2);
        for cap in [1, 2, 3, 100, 10_000] {
            assert_eq!(gw_progeny_sample(&two, cap, &mut rng).unwrap().progeny, Progeny::Exceeded);
        }
        assert!(gw_progeny_sample(&two, 0, &mut rng).is_err());
    }

    #[test]
    fn subcritical_progeny_mean() {
        let q = 0.5;
        let law = CapitalLaw::bernoulli(q).unwrap();
        let mut rng = stream(5);
        let samples: Vec<ProgenySample> = (0..100_000).map(|_| gw_progeny_sample(&law, 10_000, &mut rng).unwrap()).collect();
        assert_eq!(samples.iter().filter(|s| s.survived_proxy).count(), 0);
        let mean = samples
            .iter()
            .map(|s| match s.progeny {
                Progeny::Exact(z) => z as f64,
                Progeny::Exceeded => unreachable!(),
            })
            .sum::<f64>()
            / samples.len() as f64;
        assert!((mean - 1.0 / (1.0 - q)).abs() < 0.02, "{mean}");
    }

    #[test]
    fn subcritical_check_degenerate_and_precondition() {
        let r = subcritical_equivalence_check(&CapitalLaw::constant(0), 50, 100, 1, 1).unwrap();
        assert_eq!((r.tv_tau_plus_one, r.tv_informed), (0.0, 0.0));
        assert!(subcritical_equivalence_check(&CapitalLaw::constant(2), 50, 100, 1, 1).is_err());
        assert!(subcritical_equivalence_check(&CapitalLaw::constant(1), 50, 100, 1, 1).is_err());
    }
}
