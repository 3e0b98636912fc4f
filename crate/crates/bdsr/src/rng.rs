//! Seeded random streams. Every generator draws from ChaCha20 seeded by
//! `seed_from_u64(seed)` on a purpose-specific stream, so the subspace, the
//! scene and the noise of one run are independent yet reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::C64;

pub const ALGORITHM: &str = "ChaCha20Rng::seed_from_u64 (rand_chacha 0.9) with per-purpose stream";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Subspace = 1,
    Scene = 2,
    Shifts = 3,
    Noise = 4,
    Trial = 5,
}

pub fn stream(seed: u64, s: Stream) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(s as u64);
    r
}

/// Circularly symmetric complex Gaussian with E|z|² = 1.
pub fn complex_normal<R: Rng>(rng: &mut R) -> C64 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(h * re, h * im)
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
