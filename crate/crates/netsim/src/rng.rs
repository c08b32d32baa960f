//! Named random streams derived from one seed.

use edsc_core::crypto::hash_parts;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent stream for `(label, index)` under `seed`.
pub fn stream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let d = hash_parts(&[b"edsc/sim/rng", &seed.to_be_bytes(), label.as_bytes(), &index.to_be_bytes()]);
    ChaCha8Rng::from_seed(d.0)
}

/// `mean * Exp(1)` by inverse transform.
pub fn exp_draw<R: Rng>(rng: &mut R, mean: f64) -> f64 {
    let u: f64 = rng.gen();
    -mean * libm::log(1.0 - u)
}

/// Microsecond duration, rounded.
pub fn us(seconds: f64) -> u64 {
    libm::round(seconds * 1e6) as u64
}

pub fn secs(us: u64) -> f64 {
    us as f64 / 1e6
}
