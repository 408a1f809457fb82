//! Seedable, splittable random streams.
//!
//! Every random quantity in the crate is drawn from a [`ChaCha8Rng`] obtained
//! through [`stream`]. A stream is identified by a master seed and a 64-bit
//! stream index; ChaCha's native stream selector makes distinct indices
//! statistically independent, so parallel workers never share state and
//! results never depend on how work is scheduled.
//!
//! Multi-level identifiers (cell, batch, ...) are folded into one index with
//! [`stream_index`], a SplitMix64-style mix.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Returns the generator for `(master, index)`.
pub fn stream(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Folds a path of identifiers into a single stream index.
pub fn stream_index(parts: &[u64]) -> u64 {
    let mut acc: u64 = 0x6a09_e667_f3bc_c908;
    for &p in parts {
        acc = splitmix(acc ^ splitmix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    acc
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Circularly-symmetric complex Gaussian sample with `E|z|^2 = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}
