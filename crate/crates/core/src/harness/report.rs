use std::collections::BTreeMap;

use serde::Serialize;

use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strictness {
    Tight,
    Loose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Comparator {
    pub fn holds(self, measured: f64, threshold: f64) -> bool {
        match self {
            Comparator::Less => measured < threshold,
            Comparator::Greater => measured > threshold,
            Comparator::AtLeast => measured >= threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Less => "<",
            Comparator::Greater => ">",
            Comparator::AtLeast => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub measured: f64,
    pub comparator: Comparator,
    pub threshold: f64,
    pub strictness: Strictness,
    pub pass: bool,
}

impl Verdict {
    pub fn new(name: impl Into<String>, measured: f64, comparator: Comparator, threshold: f64, strictness: Strictness) -> Self {
        Self {
            name: name.into(),
            measured,
            comparator,
            threshold,
            strictness,
            pass: comparator.holds(measured, threshold),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {} {} {} ({:?})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.comparator.symbol(),
            self.threshold,
            self.strictness
        )
    }
}

/// Mean with a normal-approximation 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stat {
    pub count: u64,
    pub mean: f64,
    pub variance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let mean = if xs.is_empty() { f64::NAN } else { stats::mean(xs) };
        let variance = stats::variance(xs);
        let half = 1.96 * (variance / xs.len() as f64).sqrt();
        Self { count: xs.len() as u64, mean, variance, ci_low: mean - half, ci_high: mean + half }
    }

    /// Proportion of `hits` among `count` trials.
    pub fn proportion(hits: u64, count: u64) -> Self {
        let p = hits as f64 / count as f64;
        let variance = p * (1.0 - p);
        let half = 1.96 * (variance / count as f64).sqrt();
        Self { count, mean: p, variance, ci_low: p - half, ci_high: p + half }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerN {
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub stats: BTreeMap<String, Stat>,
    pub values: BTreeMap<String, f64>,
}

impl PerN {
    pub fn new(n: u64, reps: u64, seed: u64) -> Self {
        Self { n, reps, seed, stats: BTreeMap::new(), values: BTreeMap::new() }
    }

    pub fn stat(&mut self, name: &str, s: Stat) {
        self.stats.insert(name.to_string(), s);
    }

    pub fn value(&mut self, name: &str, v: f64) {
        self.values.insert(name.to_string(), v);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Ks,
    ChiSquare,
    Tv,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distance {
    pub name: String,
    pub kind: DistanceKind,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dof: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    pub law: Option<String>,
    pub n_list: Vec<u64>,
    pub reps: u64,
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub extra: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub id: String,
    pub params: Params,
    pub limits: BTreeMap<String, f64>,
    pub per_n: Vec<PerN>,
    pub distances: Vec<Distance>,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn new(id: &str, params: Params) -> Self {
        Self {
            id: id.to_string(),
            params,
            limits: BTreeMap::new(),
            per_n: Vec::new(),
            distances: Vec::new(),
            verdicts: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn verdict(&mut self, v: Verdict) -> bool {
        let pass = v.pass;
        self.verdicts.push(v);
        pass
    }

    pub fn tight_failures(&self) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| v.strictness == Strictness::Tight && !v.pass).collect()
    }

    pub fn all_tight_pass(&self) -> bool {
        self.tight_failures().is_empty()
    }

    pub fn find(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
