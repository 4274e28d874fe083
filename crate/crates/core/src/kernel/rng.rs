//! Seeded, labeled random streams.
//!
//! Each concern (mobility, traffic, protocol, ...) gets its own stream derived
//! from the master seed by hashing the stream label, so changing one
//! consumer's draw count never perturbs another's sequence. The generator is
//! ChaCha8 — a fixed, portable keyed stream cipher — so identical
//! `(seed, label)` pairs yield identical value sequences on any platform.

use rand::Rng;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Generator identity, recorded in run metadata.
pub const RNG_ALGORITHM: &str = "chacha8";

/// FNV-1a 64-bit hash. Used for stream-label derivation and config hashing;
/// fixed here rather than taken from `std` so the value never depends on the
/// standard library's hasher.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[derive(Debug, Error, PartialEq)]
pub enum RngError {
    #[error("uniform bounds must satisfy lo < hi, got [{lo}, {hi})")]
    BadUniformBounds { lo: f64, hi: f64 },
    #[error("gaussian sigma must be >= 0, got {sigma}")]
    NegativeSigma { sigma: f64 },
}

/// A named random stream: `(seed, label)` fully determines the sequence.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    label: String,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, label: &str) -> Self {
        let mut key = Vec::with_capacity(8 + label.len());
        key.extend_from_slice(&seed.to_le_bytes());
        key.extend_from_slice(label.as_bytes());
        RandomStream {
            seed,
            label: label.to_owned(),
            rng: ChaCha8Rng::seed_from_u64(fnv1a64(&key)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64, RngError> {
        if !(lo < hi) {
            return Err(RngError::BadUniformBounds { lo, hi });
        }
        let v = lo + (hi - lo) * self.unit();
        // Floating rounding can land exactly on hi; fold back into the
        // half-open interval.
        Ok(if v >= hi { hi.next_down().max(lo) } else { v })
    }

    /// Gaussian draw. `sigma == 0` returns exactly `mean` and consumes no
    /// generator state.
    pub fn gaussian(&mut self, mean: f64, sigma: f64) -> Result<f64, RngError> {
        if sigma < 0.0 || sigma.is_nan() {
            return Err(RngError::NegativeSigma { sigma });
        }
        if sigma == 0.0 {
            return Ok(mean);
        }
        let normal = Normal::new(mean, sigma).expect("validated sigma");
        Ok(normal.sample(&mut self.rng))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        if n <= 1 {
            0
        } else {
            self.rng.random_range(0..n)
        }
    }
}
