//! Seed derivation for reproducible, independently-seeded subsystems.
//!
//! Every randomized component takes a seed derived from a master seed and a
//! stream index, so component i is unaffected by how many components precede
//! it (adding trees to a forest never reshuffles existing trees, training
//! the GAN never perturbs the transformer's initialization, and so on).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive an independent seed from a master seed and a stream index
/// (SplitMix64 finalizer over the pair).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic, portable RNG for a derived stream.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}

/// Deterministic, portable RNG directly from a seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream indices for the pipeline stages, kept distinct and stable so the
/// same master seed always reproduces the same run.
pub mod streams {
    pub const SPLIT: u64 = 1;
    pub const FOREST: u64 = 2;
    pub const GAN: u64 = 3;
    pub const SYNTH: u64 = 4;
    pub const TRANSFORMER: u64 = 5;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_is_deterministic_and_spreads() {
        assert_eq!(derive_seed(42, 0), derive_seed(42, 0));
        assert_ne!(derive_seed(42, 0), derive_seed(42, 1));
        assert_ne!(derive_seed(42, 0), derive_seed(43, 0));
    }

    #[test]
    fn stream_rngs_are_independent_of_each_other() {
        use rand::RngCore;
        let a1 = stream_rng(7, 1).next_u64();
        let mut r2 = stream_rng(7, 2);
        r2.next_u64();
        // Re-deriving stream 1 is unaffected by stream 2 having been used.
        assert_eq!(a1, stream_rng(7, 1).next_u64());
    }
}
