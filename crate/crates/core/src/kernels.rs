//! Closed-form reference kernels.

use crate::error::{Error, Result};
use crate::linalg::{Complex64, RealMatrix};
use crate::spectral::HarmonizableMixture;

/// Imaginary residue tolerated (and discarded) in [`k_hmk`].
pub const HMK_IMAG_TOL: f64 = 1e-12;

/// Silverman locally stationary kernel `exp(−2a x̄²) · exp(−(a/2) x̃²)`.
pub fn k_ls(a: f64, x: f64, x_prime: f64) -> f64 {
    let mid = 0.5 * (x + x_prime);
    let lag = x - x_prime;
    (-2.0 * a * mid * mid).exp() * (-0.5 * a * lag * lag).exp()
}

/// `k_LS(x, x′) · Σ_ij B_ij exp(i(η_i x − η_j x′))`, required to be real.
pub fn k_hmk(params: &HarmonizableMixture, x: f64, x_prime: f64) -> Result<f64> {
    let value = k_hmk_complex(params, x, x_prime);
    let tolerance = HMK_IMAG_TOL * value.re.abs().max(1.0);
    if value.im.abs() > tolerance {
        return Err(Error::NonRealKernel {
            residue: value.im.abs(),
            tolerance,
        });
    }
    Ok(value.re)
}

pub fn k_hmk_complex(params: &HarmonizableMixture, x: f64, x_prime: f64) -> Complex64 {
    let b = params.amplitude();
    let etas = params.etas();
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, eta_i) in etas.iter().enumerate() {
        for (j, eta_j) in etas.iter().enumerate() {
            acc += b[(i, j)] * Complex64::from_polar(1.0, eta_i * x - eta_j * x_prime);
        }
    }
    acc * k_ls(params.a(), x, x_prime)
}

pub fn k_rbf(lengthscale: f64, variance: f64, x: f64, x_prime: f64) -> f64 {
    let lag = x - x_prime;
    variance * (-lag * lag / (2.0 * lengthscale * lengthscale)).exp()
}

#[derive(Debug, Clone)]
pub enum KernelParams {
    LocallyStationary { a: f64 },
    HarmonizableMixture(HarmonizableMixture),
    Rbf { lengthscale: f64, variance: f64 },
}

impl KernelParams {
    pub fn locally_stationary(a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::invalid(format!("a must be positive, got {a}")));
        }
        Ok(Self::LocallyStationary { a })
    }

    pub fn rbf(lengthscale: f64, variance: f64) -> Result<Self> {
        if !(lengthscale > 0.0) || !(variance > 0.0) {
            return Err(Error::invalid(
                "RBF lengthscale and variance must be positive",
            ));
        }
        Ok(Self::Rbf {
            lengthscale,
            variance,
        })
    }

    pub fn eval(&self, x: f64, x_prime: f64) -> Result<f64> {
        match self {
            Self::LocallyStationary { a } => Ok(k_ls(*a, x, x_prime)),
            Self::HarmonizableMixture(h) => k_hmk(h, x, x_prime),
            Self::Rbf {
                lengthscale,
                variance,
            } => Ok(k_rbf(*lengthscale, *variance, x, x_prime)),
        }
    }

    /// Cross-covariance matrix `[k(x_i, y_j)]`.
    pub fn cross(&self, xs: &[f64], ys: &[f64]) -> Result<RealMatrix> {
        let mut k = RealMatrix::zeros(xs.len(), ys.len());
        for (i, x) in xs.iter().enumerate() {
            for (j, y) in ys.iter().enumerate() {
                k[(i, j)] = self.eval(*x, *y)?;
            }
        }
        Ok(k)
    }
}

/// Symmetric Gram matrix; the upper triangle is mirrored from the lower.
pub fn gram(params: &KernelParams, xs: &[f64]) -> Result<RealMatrix> {
    let n = xs.len();
    let mut k = RealMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = params.eval(xs[i], xs[j])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{min_symmetric_eigenvalue, real_trace, ComplexMatrix};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{E, PI};

    #[test]
    fn ls_values() {
        assert_eq!(k_ls(1.0, 0.0, 0.0), 1.0);
        assert_relative_eq!(
            k_ls(1.0, 0.7, 0.7),
            (-2.0 * 0.49f64).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(k_ls(0.5, 1.0, -1.0), 1.0 / E, max_relative = 1e-15);
    }

    #[test]
    fn ls_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (x, y) = (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let k = k_ls(0.8, x, y);
            assert!(k > 0.0 && k <= 1.0);
            assert_eq!(k, k_ls(0.8, y, x));
            assert_eq!(k, k_ls(0.8, -x, -y));
        }
    }

    #[test]
    fn hmk_reference_values() {
        let h = HarmonizableMixture::reference();
        assert_relative_eq!(k_hmk(&h, 0.0, 0.0).unwrap(), 4.0, epsilon = 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x = rng.gen_range(-3.0..3.0);
            assert!(k_hmk_complex(&h, x, x).im.abs() < 1e-14);
            let y = rng.gen_range(-3.0..3.0);
            assert!(k_hmk(&h, x, y).is_ok());
        }
    }

    #[test]
    fn hmk_identity_amplitude_at_origin() {
        let h = HarmonizableMixture::new(0.7, vec![1.0, 2.5, -4.0], ComplexMatrix::identity(3, 3))
            .unwrap();
        assert_relative_eq!(k_hmk(&h, 0.0, 0.0).unwrap(), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn hmk_reduces_to_scaled_ls_at_zero_shift() {
        let i = Complex64::new(0.0, 1.0);
        let b = ComplexMatrix::from_row_slice(2, 2, &[2.0.into(), 0.5 * i, -0.5 * i, 2.0.into()]);
        let h = HarmonizableMixture::new(1.3, vec![0.0, 0.0], b).unwrap();
        for (x, y) in [(0.1, 0.4), (-1.0, 2.0), (0.0, 0.0)] {
            assert_relative_eq!(
                k_hmk(&h, x, y).unwrap(),
                4.0 * k_ls(1.3, x, y),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn non_real_hmk_is_rejected() {
        let h = HarmonizableMixture::new(1.0, vec![PI], ComplexMatrix::identity(1, 1)).unwrap();
        assert!(matches!(
            k_hmk(&h, 0.5, 0.0),
            Err(Error::NonRealKernel { .. })
        ));
    }

    #[test]
    fn rbf_values() {
        assert_eq!(k_rbf(0.7, 2.0, 1.3, 1.3), 2.0);
        assert_relative_eq!(
            k_rbf(0.7, 2.0, 0.0, 0.7 * 2f64.sqrt()),
            2.0 / E,
            max_relative = 1e-15
        );
        assert!(k_rbf(0.7, 2.0, 0.0, 1e3) < 1e-300);
    }

    #[test]
    fn gram_shapes_and_diagonal() {
        let p = KernelParams::locally_stationary(1.0).unwrap();
        assert_eq!(gram(&p, &[0.3]).unwrap().shape(), (1, 1));
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.05).collect();
        let k = gram(&p, &xs).unwrap();
        for (i, x) in xs.iter().enumerate() {
            assert_relative_eq!(k[(i, i)], (-2.0 * x * x).exp(), max_relative = 1e-15);
        }
    }

    #[test]
    fn gram_matrices_are_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kernels = [
            KernelParams::locally_stationary(1.0).unwrap(),
            KernelParams::HarmonizableMixture(HarmonizableMixture::reference()),
            KernelParams::rbf(0.5, 1.5).unwrap(),
        ];
        for trial in 0..100 {
            let n = rng.gen_range(2..30);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let k = gram(&kernels[trial % 3], &xs).unwrap();
            let n = n as f64;
            assert!(
                min_symmetric_eigenvalue(&k) >= -1e-8 * real_trace(&k) / n,
                "trial {trial}"
            );
        }
    }
}
