use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed law spec `{spec}`: {reason}")]
    MalformedLaw { spec: String, reason: String },

    #[error("probability {value} outside [0, 1] in `{spec}`")]
    ProbabilityOutOfRange { spec: String, value: f64 },

    #[error("pmf in `{spec}` sums to {total}, not 1")]
    PmfNotNormalized { spec: String, total: f64 },

    #[error("law `{0}` has no finite exponential moment")]
    NoExponentialMoment(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("law `{0}` has unbounded support")]
    UnboundedLaw(String),

    #[error("state budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },

    #[error("insufficient sample: {0}")]
    InsufficientSample(String),
}

pub type Result<T> = std::result::Result<T, Error>;
