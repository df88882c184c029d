//! Seeded random streams.
//!
//! Every run derives independent ChaCha8 streams from one seed, one per
//! consumer, so that changing how one consumer draws never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream ids used by the engine.
pub mod streams {
    pub const DELAYS: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const WORKERS: u64 = 3;
    pub const PROBLEM: u64 = 4;
    pub const ESTIMATION: u64 = 5;
}

pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `Binomial(n, p)` with the degenerate probabilities handled up front.
pub fn binomial(n: u64, p: f64, rng: &mut SimRng) -> u64 {
    use rand_distr::{Binomial, Distribution};
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}
