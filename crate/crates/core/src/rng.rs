//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed, with the
//! 64-bit stream id derived from `(a, b)` (typically clone id and sweep).
//! Output therefore depends only on the key, never on scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn key_bytes(master: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut x = master;
    for chunk in key.chunks_mut(8) {
        x = x.wrapping_add(GOLDEN);
        chunk.copy_from_slice(&mix64(x).to_le_bytes());
    }
    key
}

/// Stream for the pair `(a, b)` under `master`.
pub fn stream(master: u64, a: u64, b: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::from_seed(key_bytes(master));
    rng.set_stream(mix64(a.wrapping_mul(GOLDEN) ^ mix64(b.wrapping_add(0x632B_E59B_D9B4_E019))));
    rng
}

/// Uniform in `[0, 1)` with 53 random bits.
#[inline]
pub fn uniform(rng: &mut StreamRng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Cheap source of fair coin flips drawn 64 at a time.
pub struct Bits {
    word: u64,
    left: u32,
}

impl Bits {
    pub fn new() -> Self {
        Self { word: 0, left: 0 }
    }

    #[inline]
    pub fn flip(&mut self, rng: &mut StreamRng) -> bool {
        if self.left == 0 {
            self.word = rng.next_u64();
            self.left = 64;
        }
        let b = self.word & 1 == 1;
        self.word >>= 1;
        self.left -= 1;
        b
    }
}

impl Default for Bits {
    fn default() -> Self {
        Self::new()
    }
}

/// Number of failures before the next success of a Bernoulli(p) sequence.
#[inline]
pub fn geometric_skip(rng: &mut StreamRng, log1mp: f64) -> u64 {
    let u = 1.0 - uniform(rng);
    let k = (u.ln() / log1mp).floor();
    if k >= u64::MAX as f64 { u64::MAX } else { k as u64 }
}
