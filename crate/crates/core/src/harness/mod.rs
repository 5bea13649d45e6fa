//! Experiments, their reports, and the acceptance suite.

pub mod experiments;
pub mod report;
pub mod verify;

pub use experiments::{Engine, RunOptions, DEFAULT_SEED};
pub use report::{ExperimentReport, Strictness, Verdict};
