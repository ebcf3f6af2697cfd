//! Seeded random generation for law suites and verification sweeps.
//!
//! The generator is ChaCha8 seeded through `SeedableRng::seed_from_u64`
//! (rand_chacha 0.9). A uniform double in `[0, 1)` is built from the top 53
//! bits of one `next_u64` draw, `(x >> 11) * 2^-53`, and mapped affinely to
//! the requested interval. Nothing else consumes randomness, so a seed pins
//! every generated operation, state and parameter vector.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::multilinear::{Operation, Vector};

pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform in `[-1, 1)`.
    pub fn symmetric(&mut self) -> f64 {
        self.uniform(-1.0, 1.0)
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        let span = (hi - lo + 1) as u64;
        lo + (self.inner.next_u64() % span) as usize
    }

    pub fn choose<T: Copy>(&mut self, items: &[T]) -> T {
        items[self.int_inclusive(0, items.len() - 1)]
    }

    /// Operation with coefficients uniform in `[-1, 1)`.
    pub fn operation(&mut self, dim: usize, arity: usize) -> Operation {
        let len = dim.pow(arity as u32 + 1);
        let coeffs = (0..len).map(|_| self.symmetric()).collect();
        Operation::new(dim, arity, coeffs).expect("generated coefficients are finite")
    }

    pub fn vector(&mut self, dim: usize) -> Vector {
        Vector::new((0..dim).map(|_| self.symmetric()).collect()).expect("finite entries")
    }
}

/// Seed for trial `index` of a suite started from `base`.
pub fn trial_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}
