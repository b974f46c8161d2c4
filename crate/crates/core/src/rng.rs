//! Deterministic random-number helpers.
//!
//! All randomness in the crate flows through a ChaCha8 stream cipher seeded
//! explicitly by the caller. The helpers here derive uniform doubles,
//! Gaussian pairs, permutations, and subsamples from raw 64-bit draws using
//! fixed arithmetic, so a given seed produces the same values on every
//! platform and toolchain version — no distribution code from the `rand`
//! crate family is involved beyond the cipher itself.

use rand_chacha::ChaCha8Rng;
use rand_core::{Rng, SeedableRng};

/// Create the crate-standard PRNG from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform double in the half-open interval `[0, 1)`.
///
/// Uses the top 53 bits of one 64-bit draw, so every representable value is
/// an integer multiple of 2^-53.
pub fn unit_halfopen(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform double in the half-open interval `(0, 1]` — safe to pass to `ln`.
pub fn unit_open_right(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// One pair of independent standard normal deviates via the Box-Muller
/// transform.
///
/// Consumes exactly two 64-bit draws, in the order (radius, angle).
pub fn standard_normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1 = unit_open_right(rng);
    let u2 = unit_halfopen(rng);
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Uniform index in `[0, bound)`, unbiased via rejection sampling.
///
/// # Panics
///
/// Panics if `bound == 0`.
pub fn uniform_index(rng: &mut ChaCha8Rng, bound: usize) -> usize {
    assert!(bound > 0, "uniform_index requires a positive bound");
    let bound = bound as u64;
    // 2^64 - threshold is a multiple of `bound`, so accepted draws cover
    // every residue class equally often.
    let threshold = bound.wrapping_neg() % bound;
    loop {
        let x = rng.next_u64();
        if x >= threshold {
            return (x % bound) as usize;
        }
    }
}

/// Uniformly random permutation of `0..n` (Fisher-Yates, descending sweep).
pub fn permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = uniform_index(rng, i + 1);
        idx.swap(i, j);
    }
    idx
}

/// `s` distinct indices sampled uniformly from `0..n`, without replacement.
///
/// # Panics
///
/// Panics if `s > n`.
pub fn sample_without_replacement(rng: &mut ChaCha8Rng, n: usize, s: usize) -> Vec<usize> {
    assert!(s <= n, "cannot sample {s} of {n} without replacement");
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..s {
        let j = i + uniform_index(rng, n - i);
        idx.swap(i, j);
    }
    idx.truncate(s);
    idx
}

/// `s` indices sampled uniformly from `0..n`, with replacement.
pub fn sample_with_replacement(rng: &mut ChaCha8Rng, n: usize, s: usize) -> Vec<usize> {
    (0..s).map(|_| uniform_index(rng, n)).collect()
}

/// SplitMix64 finalizer; good avalanche, used for seed derivation only.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent child seed from a base seed and a stream tag.
pub fn mix_seed(base: u64, tag: u64) -> u64 {
    splitmix64(base ^ splitmix64(tag))
}

/// Content hash of a feature row (exact bit patterns of the doubles).
///
/// Used to give per-query sampling a stream that depends only on the query's
/// value, never on call order.
pub fn hash_row(x: &[f64]) -> u64 {
    let mut h = 0x51_7C_C1_B7_27_22_0A_95u64 ^ (x.len() as u64);
    for &v in x {
        h = splitmix64(h ^ v.to_bits());
    }
    h
}
