//! Seeded, splittable random streams.
//!
//! Every stochastic operation in the crate takes an explicit `u64` seed. A
//! seed names a ChaCha8 key; independent sub-streams (chains, replicates,
//! sessions) are obtained by selecting a distinct ChaCha stream id under the
//! same key, so results never depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SsrtRng = ChaCha8Rng;

/// Stream 0 of `seed`.
pub fn seeded(seed: u64) -> SsrtRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under `seed`.
pub fn substream(seed: u64, stream: u64) -> SsrtRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from a parent seed and an index (SplitMix64 finalizer).
///
/// Used where a callee takes a plain seed rather than an RNG, e.g. one
/// simulated session per replicate.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
