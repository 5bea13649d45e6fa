//! Deterministic per-replicate random streams.
//!
//! Replicate `r` of an experiment draws from a ChaCha8 stream whose key is
//! derived from `(master seed, experiment id, r)` by the SplitMix64
//! finalizer. Streams never depend on scheduling, so batches give the same
//! results for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RandomStream = ChaCha8Rng;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for replicate `rep` under `seed`.
pub fn replicate_seed(seed: u64, rep: u64) -> u64 {
    mix64(seed ^ mix64(rep.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// FNV-1a hash of an experiment identifier.
pub fn id_hash(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Master seed of a named sub-experiment.
pub fn experiment_seed(seed: u64, id: &str) -> u64 {
    mix64(seed ^ id_hash(id))
}

pub fn stream(seed: u64) -> RandomStream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw on `(0, 1]`.
pub fn open_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn replicate_streams_differ() {
        let a: u64 = stream(replicate_seed(7, 0)).gen();
        let b: u64 = stream(replicate_seed(7, 1)).gen();
        assert_ne!(a, b);
    }

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = (0..4).map(|r| stream(replicate_seed(3, r)).gen()).collect();
        let b: Vec<u64> = (0..4).map(|r| stream(replicate_seed(3, r)).gen()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn id_hash_is_stable() {
        // FNV-1a of the empty string is the offset basis.
        assert_eq!(id_hash(""), 0xcbf2_9ce4_8422_2325);
        assert_ne!(id_hash("lln"), id_hash("clt"));
    }
}
