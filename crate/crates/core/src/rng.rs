//! Deterministic, splittable random streams.
//!
//! Every stream is a ChaCha8 keystream whose 256-bit key is expanded from a
//! 64-bit stream key with SplitMix64. Child streams are derived by mixing a
//! tag into the parent key, so a stream's output depends only on the master
//! seed and the path of tags used to reach it, never on call order or thread
//! scheduling. Integer and float draws are computed here from raw `u64`
//! output so the sequences are identical on every platform.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Identifier written into checkpoints so a reader can tell which generator
/// produced a seeded trace.
pub const RNG_ALGORITHM: &str = "chacha8-splitmix64-v1";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(key: u64, tag: u64) -> u64 {
    let mut s = key ^ tag.wrapping_mul(GOLDEN).rotate_left(17);
    splitmix64(&mut s) ^ splitmix64(&mut s).rotate_left(32)
}

#[derive(Clone, Debug)]
pub struct Stream {
    key: u64,
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        let mut s = seed;
        let mut bytes = [0u8; 32];
        for chunk in bytes.chunks_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
        }
        Stream {
            key: seed,
            rng: ChaCha8Rng::from_seed(bytes),
        }
    }

    /// Independent child stream identified by `tag`.
    pub fn derive(&self, tag: u64) -> Stream {
        Stream::new(mix(self.key, tag))
    }

    /// Child stream identified by a path of tags.
    pub fn derive_path(&self, tags: &[u64]) -> Stream {
        let key = tags.iter().fold(self.key, |k, &t| mix(k, t));
        Stream::new(key)
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`; `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        // Lemire's multiply-shift with rejection.
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            let m = (x as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.below(n as u64) as usize
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal draw (Box-Muller, one value per call).
    pub fn normal(&mut self) -> f64 {
        loop {
            let u1 = self.next_f64();
            if u1 > 0.0 {
                let u2 = self.next_f64();
                return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            }
        }
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.index(i + 1);
            xs.swap(i, j);
        }
    }
}

/// Stable 64-bit tag for a string label, for use with [`Stream::derive`].
pub fn tag(label: &str) -> u64 {
    // FNV-1a
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}
