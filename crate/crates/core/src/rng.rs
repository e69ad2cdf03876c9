//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from a [`ChaCha8Rng`] built by
//! [`seeded_rng`]. Sub-experiments of one run (the `k`-th chain of a sweep,
//! the parameter draw, the Baum–Welch jitter) get their own seed from
//! [`derive_seed`], so a chain written to disk can be regenerated from the
//! seed in its header alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer applied to `seed + (stream + 1) * golden_gamma`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream ids reserved for the consumers of one top-level seed.
pub mod streams {
    pub const PARAMS: u64 = 0;
    pub const JITTER: u64 = 1;
    /// Chain `k` of a run uses `CHAINS + k`.
    pub const CHAINS: u64 = 1 << 32;
}
