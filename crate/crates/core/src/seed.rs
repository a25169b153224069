//! Reproducible random streams.
//!
//! Every replicate owns an independent ChaCha8 stream whose 256-bit key is
//! derived from `(seed_base, index)` with the following bit-exact recipe, so
//! ports to other languages reproduce the same draws:
//!
//! ```text
//! s0      = seed_base + (index + 1) * 0x9E3779B97F4A7C15        (wrapping u64)
//! mixed   = fmix(s0)
//! key[i]  = fmix(mixed + (i + 1) * 0x9E3779B97F4A7C15), i = 0..4  (little-endian u64 words)
//! fmix(z) = z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//!           z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31
//! ```
//!
//! The ChaCha8 stream is rand_chacha's (64-bit block counter, stream id 0).
//! Uniform integers use Lemire's multiply-and-reject method on `next_u64`;
//! unit reals take the top 53 bits of `next_u64`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The generator used for every simulation in this crate.
pub type UrnRng = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn fmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed and a replicate index into a single 64-bit stream seed.
#[inline]
pub fn mix(seed_base: u64, index: u64) -> u64 {
    fmix64(seed_base.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Expands a 64-bit seed into a ChaCha8 key.
pub fn rng_from_seed(seed: u64) -> UrnRng {
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        let word = fmix64(seed.wrapping_add((i as u64 + 1).wrapping_mul(GOLDEN)));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Generator for replicate `index` of a run seeded with `seed_base`.
pub fn replicate_rng(seed_base: u64, index: u64) -> UrnRng {
    rng_from_seed(mix(seed_base, index))
}

/// Uniform integer in `[0, bound)`. `bound` must be nonzero.
#[inline]
pub fn below<R: RngCore + ?Sized>(rng: &mut R, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let mut m = u128::from(rng.next_u64()) * u128::from(bound);
    let mut low = m as u64;
    if low < bound {
        let threshold = bound.wrapping_neg() % bound;
        while low < threshold {
            m = u128::from(rng.next_u64()) * u128::from(bound);
            low = m as u64;
        }
    }
    (m >> 64) as u64
}

/// Uniform real in `[0, 1)` with 53 random bits.
#[inline]
pub fn unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
