//! Seeded randomness. Every stochastic routine takes an explicit generator;
//! independent per-segment streams come from [`stream_rng`].

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

pub const RNG_NAME: &str = "chacha8";

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Generator for sub-task `stream` of a run seeded with `seed`. Streams of
/// the same seed do not overlap.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
