//! Seeded generators and seed mixing.
//!
//! The noise table uses ChaCha20 (`rand_chacha` 0.3, `ChaCha20Rng::seed_from_u64`)
//! as its bit source and the Box-Muller transform to produce standard normals.
//! Normal pair `k` consumes 64-bit outputs `2k` and `2k + 1` of the stream:
//!
//! ```text
//! u1 = ((a >> 11) + 1) * 2^-53        in (0, 1]
//! u2 = (b >> 11) * 2^-53              in [0, 1)
//! z0 = sqrt(-2 ln u1) * cos(2 pi u2)
//! z1 = sqrt(-2 ln u1) * sin(2 pi u2)
//! ```
//!
//! Per-episode seeds use [`mix_seed`], a SplitMix64 finalizer applied to the
//! base seed xor the golden-ratio-scaled index.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

/// SplitMix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed for item `index` of a task family rooted at `base`:
/// `splitmix64(base ^ (index * 0x9E3779B97F4A7C15))`.
#[inline]
pub fn mix_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ index.wrapping_mul(GOLDEN))
}

/// Uniform real in `[0, 1)` from the top 53 bits of `bits`.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * INV_2_53
}

/// Box-Muller transform of two raw 64-bit draws into two standard normals.
#[inline]
pub fn box_muller(a: u64, b: u64) -> (f64, f64) {
    let u1 = ((a >> 11) + 1) as f64 * INV_2_53;
    let u2 = (b >> 11) as f64 * INV_2_53;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

/// Fills `out` with standard normals, starting at normal index `start`
/// (which must be even) of the stream seeded by `seed`.
pub fn fill_normals(seed: u64, start: usize, out: &mut [f64]) {
    debug_assert!(start.is_multiple_of(2));
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // one normal pair = two u64 = four 32-bit words
    rng.set_word_pos(2 * start as u128);
    let mut pairs = out.chunks_exact_mut(2);
    for pair in &mut pairs {
        let (z0, z1) = box_muller(rng.next_u64(), rng.next_u64());
        pair[0] = z0;
        pair[1] = z1;
    }
    if let [last] = pairs.into_remainder() {
        *last = box_muller(rng.next_u64(), rng.next_u64()).0;
    }
}

/// Small seeded generator for handle sampling and parameter initialisation.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
