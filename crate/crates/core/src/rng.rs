//! Seeded randomness with a pinned algorithm.
//!
//! Every random decision in the crate draws from [`ChaCha8Rng`] through the
//! helpers below rather than through `rand`'s distribution and shuffle
//! helpers, whose sampling algorithms are allowed to change between releases.
//! With the stream cipher fixed and the reductions written out here, a seed
//! produces the same split manifests and forests on every platform.

use rand_chacha::rand_core::RngCore;
use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Generator for `seed`, positioned on stream `stream`.
///
/// Distinct streams of one seed are independent, which lets parallel workers
/// (one per tree, say) draw without sharing state.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform integer in `0..bound` by rejection on the top of the `u64` range.
pub fn below<R: RngCore + ?Sized>(rng: &mut R, bound: u64) -> u64 {
    assert!(bound > 0, "empty range");
    // largest multiple of bound that fits; reject draws above it
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % bound;
        }
    }
}

/// Uniform real in the open interval (0, 1) with 53 bits of resolution.
pub fn open01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let v = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        if v > 0.0 {
            return v;
        }
    }
}

/// Uniform real in [0, 1).
pub fn unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw (Box-Muller, cosine branch only).
pub fn normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u1 = open01(rng);
    let u2 = unit(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// In-place Fisher-Yates shuffle: for `i` from `len-1` down to 1, swap
/// element `i` with element `below(i+1)`.
pub fn shuffle<T, R: RngCore + ?Sized>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// A uniformly random permutation of `0..n`.
pub fn permutation<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    shuffle(rng, &mut idx);
    idx
}
