//! Portable seeded randomness.
//!
//! Every party must derive bit-identical mask matrices from a shared 64-bit
//! seed, so the generator is pinned down completely:
//!
//! * The stream is ChaCha20 (`rand_chacha::ChaCha20Rng`), keyed by a 32-byte
//!   seed laid out as `seed (u64 LE) | domain (u64 LE) | stream (u64 LE) | 0u64`.
//!   `domain` separates unrelated uses of the same seed (mask matrix, private
//!   left-inverse perturbations, fold shuffles, ...) and `stream` indexes
//!   redraws or iterations within a domain.
//! * Uniforms take the top 53 bits of `next_u64`: `u = (x >> 11) · 2⁻⁵³`.
//! * Normals come in pairs from the Box–Muller transform with
//!   `u1 = ((x₁ >> 11) + 1) · 2⁻⁵³ ∈ (0, 1]` and `u2 = (x₂ >> 11) · 2⁻⁵³`:
//!   `z₀ = √(−2 ln u1) · cos(2π u2)`, `z₁ = √(−2 ln u1) · sin(2π u2)`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::Matrix;

/// Domain tags for [`MaskRng::new`].
pub mod domain {
    pub const MASK_MATRIX: u64 = 0x4d41_534b; // "MASK"
    pub const LEFT_INVERSE: u64 = 0x4c49_4e56; // "LINV"
    pub const ORTHOGONAL: u64 = 0x4f52_5448; // "ORTH"
    pub const SYNTHETIC: u64 = 0x5359_4e54; // "SYNT"
    pub const FOLDS: u64 = 0x464f_4c44; // "FOLD"
    pub const TESTING: u64 = 0x5445_5354; // "TEST"
}

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

pub struct MaskRng {
    inner: ChaCha20Rng,
    spare: Option<f64>,
}

impl MaskRng {
    pub fn new(seed: u64, domain: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&domain.to_le_bytes());
        key[16..24].copy_from_slice(&stream.to_le_bytes());
        MaskRng { inner: ChaCha20Rng::from_seed(key), spare: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * TWO_POW_M53
    }

    /// Uniform integer on `[0, bound)`, unbiased by rejection.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let x = self.inner.next_u64();
            if x < zone {
                return x % bound;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = ((self.inner.next_u64() >> 11) + 1) as f64 * TWO_POW_M53;
        let u2 = (self.inner.next_u64() >> 11) as f64 * TWO_POW_M53;
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Row-major matrix of standard normals.
    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.normal())
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_separated() {
        let a: Vec<u64> = (0..4).map({
            let mut r = MaskRng::new(7, domain::MASK_MATRIX, 0);
            move |_| r.next_u64()
        }).collect();
        let mut again = MaskRng::new(7, domain::MASK_MATRIX, 0);
        assert!(a.iter().all(|&x| x == again.next_u64()));
        let mut other = MaskRng::new(7, domain::LEFT_INVERSE, 0);
        assert_ne!(a[0], other.next_u64());
    }

    #[test]
    fn normals_have_plausible_moments() {
        let mut r = MaskRng::new(1, domain::TESTING, 0);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn below_stays_in_range() {
        let mut r = MaskRng::new(3, domain::TESTING, 1);
        assert!((0..1000).all(|_| r.below(7) < 7));
    }
}
