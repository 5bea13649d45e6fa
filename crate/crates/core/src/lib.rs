pub mod batch;
pub mod coupon;
pub mod error;
pub mod exact;
pub mod extjson;
pub mod harness;
pub mod law;
pub mod ldp;
pub mod limits;
pub mod markov;
pub mod numeric;
pub mod pruning;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use law::CapitalLaw;
