//! Counter-based random streams.
//!
//! Every random quantity is addressed by `(seed, stream, position)` so that
//! results do not depend on how work is split across threads.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers, one per consumer.
pub(crate) mod stream {
    pub const TRAINING: u64 = 1;
    pub const CODEBOOK: u64 = 2;
    pub const TRIAL: u64 = 3;
    pub const RCU_SAMPLES: u64 = 4;
    pub const DRAW: u64 = 5;
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `(seed, tag, index)`.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    let a = mix(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let b = mix(a ^ tag.wrapping_mul(0xd6e8_feb8_6659_fd93));
    mix(b ^ index.wrapping_mul(0xa076_1d64_78bd_642f))
}

/// Generator for the `stream`-th independent sequence under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator positioned at the `index`-th block of `words_per_index` 32-bit
/// words, so element `index` sees the same bits no matter who generates it.
pub fn indexed_rng(seed: u64, stream: u64, index: u64, words_per_index: u64) -> ChaCha8Rng {
    let mut rng = stream_rng(seed, stream);
    rng.set_word_pos(index as u128 * words_per_index as u128);
    rng
}

/// Uniform draw from `[0, 1)` with 53 random bits; consumes two words.
pub fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF draw from a pmf given as a slice; one `unit_f64` draw.
pub fn sample_index(rng: &mut impl RngCore, pmf: &[f64]) -> usize {
    let u = unit_f64(rng);
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in pmf.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}
