//! Deterministic random streams.
//!
//! Every random draw in the crate comes from [`Prng`]: ChaCha8 (via
//! `rand_chacha`, seeded with `seed_from_u64`) for the raw 64-bit words,
//! `(word >> 11) * 2^-53` for uniforms on `[0, 1)`, and the polar-free
//! Box–Muller transform for normals. Both Box–Muller outputs are used, the
//! second one cached for the next call. Matrices are filled in row-major order.
//!
//! Child streams for parallel trials are derived with [`split_seed`], the
//! SplitMix64 finalizer applied to `seed + (stream + 1) * 0x9E3779B97F4A7C15`.

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for the `stream`-th child of `seed`.
pub fn split_seed(seed: u64, stream: u64) -> u64 {
    mix64(seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone)]
pub struct Prng {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Prng {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Independent stream for trial `stream` of an experiment seeded with `seed`.
    pub fn child(seed: u64, stream: u64) -> Self {
        Prng::new(split_seed(seed, stream))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[low, high)`.
    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - U lies in (0, 1], so the log is finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn normal(&mut self, scale: f64) -> f64 {
        scale * self.standard_normal()
    }
}

/// `rows x cols` matrix of i.i.d. `N(0, scale^2)` draws, filled row by row.
pub fn gaussian_matrix(prng: &mut Prng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_row_iterator(rows, cols, (0..rows * cols).map(|_| prng.normal(scale)))
}

/// `rows x cols` matrix of i.i.d. uniform draws on `[-bound, bound)`, filled row by row.
pub fn uniform_matrix(prng: &mut Prng, rows: usize, cols: usize, bound: f64) -> DMatrix<f64> {
    DMatrix::from_row_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| prng.uniform_range(-bound, bound)),
    )
}
