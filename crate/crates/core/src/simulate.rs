//! Sample paths of the discretized harmonizable process.
//!
//! Randomness comes from ChaCha20 (`rand_chacha`), seeded with a 64-bit seed
//! and split into independent streams by path index, which is reproducible
//! across platforms. Uniforms take the top 53 bits of a `u64` and are shifted
//! by half an ulp into `(0, 1)`. Normals use the Box–Muller transform
//! `r = √(−2 ln u₁)`, `(r cos 2πu₂, r sin 2πu₂)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::Result;
use crate::features::{build_feature_matrix, FeatureFactor, FeatureMode};
use crate::linalg::{Complex64, ComplexMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeededRng {
    seed: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for stream `id`.
    pub fn stream(&self, id: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }
}

pub fn uniform_open01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Two independent standard normals.
pub fn box_muller<R: RngCore + ?Sized>(rng: &mut R) -> (f64, f64) {
    let u1 = uniform_open01(rng);
    let u2 = uniform_open01(rng);
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * PI * u2;
    (r * theta.cos(), r * theta.sin())
}

pub fn standard_normals<R: RngCore + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len + 1);
    while out.len() < len {
        let (a, b) = box_muller(rng);
        out.push(a);
        out.push(b);
    }
    out.truncate(len);
    out
}

/// Circular complex normals with real and imaginary parts `N(0, ½)`.
pub fn circular_normals<R: RngCore + ?Sized>(rng: &mut R, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|_| {
            let (a, b) = box_muller(rng);
            Complex64::new(a * FRAC_1_SQRT_2, b * FRAC_1_SQRT_2)
        })
        .collect()
}

pub fn sample_circular_gaussian(p: usize, seed: u64) -> Vec<Complex64> {
    circular_normals(&mut SeededRng::new(seed).stream(0), p)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Path {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Path {
    pub fn len(&self) -> usize {
        match self {
            Path::Real(v) => v.len(),
            Path::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn real_part(&self) -> Vec<f64> {
        match self {
            Path::Real(v) => v.clone(),
            Path::Complex(v) => v.iter().map(|z| z.re).collect(),
        }
    }
}

/// Precomputed feature rows for repeated draws at fixed locations.
#[derive(Debug, Clone)]
pub struct PathSampler {
    features: ComplexMatrix,
    mode: FeatureMode,
}

impl PathSampler {
    pub fn new(factor: &FeatureFactor, xs: &[f64], strict: bool) -> Result<Self> {
        let lr = build_feature_matrix(xs, factor, strict)?;
        Ok(Self {
            features: lr.features().clone(),
            mode: factor.mode(),
        })
    }

    /// `Z = φ E` for circular `E` (complex mode) or `2·Re[φ̃ E]` for real `E`.
    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> Path {
        let q = self.features.ncols();
        match self.mode {
            FeatureMode::Complex => {
                let e = DVector::from_vec(circular_normals(rng, q));
                Path::Complex((&self.features * e).iter().copied().collect())
            }
            FeatureMode::RealHermitian | FeatureMode::RealCosine => {
                let e = standard_normals(rng, q);
                let z = self
                    .features
                    .row_iter()
                    .map(|row| 2.0 * row.iter().zip(&e).map(|(phi, e)| phi.re * e).sum::<f64>())
                    .collect();
                Path::Real(z)
            }
        }
    }

    pub fn draw_seeded(&self, seed: u64, path_id: u64) -> Path {
        self.draw(&mut SeededRng::new(seed).stream(path_id))
    }
}

pub fn simulate_path(factor: &FeatureFactor, xs: &[f64], seed: u64) -> Result<Path> {
    Ok(PathSampler::new(factor, xs, false)?.draw_seeded(seed, 0))
}

/// Draws `count` real paths (real part for complex mode) on streams `0..count`.
pub fn simulate_paths(
    factor: &FeatureFactor,
    xs: &[f64],
    seed: u64,
    count: usize,
) -> Result<Vec<Path>> {
    let sampler = PathSampler::new(factor, xs, false)?;
    Ok((0..count as u64)
        .map(|id| sampler.draw_seeded(seed, id))
        .collect())
}

/// Empirical mean and (biased) covariance of real paths.
pub fn empirical_moments(paths: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = paths.first().map_or(0, Vec::len);
    let count = paths.len().max(1) as f64;
    let mut mean = vec![0.0; n];
    for p in paths {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v / count;
        }
    }
    let mut cov = vec![vec![0.0; n]; n];
    for p in paths {
        for i in 0..n {
            for j in 0..n {
                cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]) / count;
            }
        }
    }
    (mean, cov)
}
