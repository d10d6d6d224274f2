//! Exact dense GP regression: the reference posterior and the RBF baseline.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram, KernelParams};
use crate::learn::optim::{amsgrad_step, AmsGradState};
use crate::learn::train::{variance, TrainConfig};
use crate::linalg::RealMatrix;

fn noisy_cholesky(k: &RealMatrix, sigma2: f64) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let mut sigma = k.clone();
    for i in 0..sigma.nrows() {
        sigma[(i, i)] += sigma2;
    }
    sigma.cholesky().ok_or(Error::IndefiniteInput {
        min_eigenvalue: f64::NAN,
        tolerance: 0.0,
    })
}

/// Posterior mean and covariance `K_tn Σ⁻¹ z`, `K_tt − K_tn Σ⁻¹ K_nt`.
pub fn exact_posterior(
    kernel: &KernelParams,
    xs: &[f64],
    z: &[f64],
    sigma2: f64,
    xs_test: &[f64],
) -> Result<(DVector<f64>, RealMatrix)> {
    let k = gram(kernel, xs)?;
    let k_tn = kernel.cross(xs_test, xs)?;
    let k_tt = gram(kernel, xs_test)?;
    dense_posterior(&k, &k_tn, &k_tt, sigma2, z)
}

pub fn dense_posterior(
    k: &RealMatrix,
    k_tn: &RealMatrix,
    k_tt: &RealMatrix,
    sigma2: f64,
    z: &[f64],
) -> Result<(DVector<f64>, RealMatrix)> {
    let chol = noisy_cholesky(k, sigma2)?;
    let alpha = chol.solve(&DVector::from_column_slice(z));
    let mean = k_tn * alpha;
    let v = chol.solve(&k_tn.transpose());
    let cov = k_tt - k_tn * v;
    Ok((mean, (&cov + cov.transpose()) * 0.5))
}

/// Dense negative log marginal likelihood.
pub fn dense_nll(k: &RealMatrix, sigma2: f64, z: &[f64]) -> Result<f64> {
    let chol = noisy_cholesky(k, sigma2)?;
    let zv = DVector::from_column_slice(z);
    let alpha = chol.solve(&zv);
    let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    Ok(0.5 * zv.dot(&alpha) + 0.5 * logdet + 0.5 * z.len() as f64 * (2.0 * PI).ln())
}

/// Stationary RBF GP with hyperparameters in the log domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfModel {
    pub log_lengthscale: f64,
    pub log_variance: f64,
    pub log_sigma_noise2: f64,
}

impl RbfModel {
    /// Lengthscale one, variance `var(z)`, noise `0.01·var(z)`.
    pub fn init(z: &[f64]) -> Self {
        let var_z = variance(z).max(f64::MIN_POSITIVE);
        Self {
            log_lengthscale: 0.0,
            log_variance: var_z.ln(),
            log_sigma_noise2: (0.01 * var_z).ln(),
        }
    }

    pub fn kernel(&self) -> KernelParams {
        KernelParams::Rbf {
            lengthscale: self.log_lengthscale.exp(),
            variance: self.log_variance.exp(),
        }
    }

    pub fn sigma_noise2(&self) -> f64 {
        self.log_sigma_noise2.exp()
    }

    fn to_flat(self) -> [f64; 3] {
        [
            self.log_lengthscale,
            self.log_variance,
            self.log_sigma_noise2,
        ]
    }

    fn from_flat(v: &[f64]) -> Self {
        Self {
            log_lengthscale: v[0],
            log_variance: v[1],
            log_sigma_noise2: v[2],
        }
    }

    pub fn nll(&self, xs: &[f64], z: &[f64]) -> Result<f64> {
        dense_nll(&gram(&self.kernel(), xs)?, self.sigma_noise2(), z)
    }

    /// NLL and its gradient via `½ tr((Σ⁻¹ − ααᵀ) ∂Σ)`.
    pub fn nll_and_gradient(&self, xs: &[f64], z: &[f64]) -> Result<(f64, [f64; 3])> {
        let n = xs.len();
        let ell = self.log_lengthscale.exp();
        let k = gram(&self.kernel(), xs)?;
        let sigma2 = self.sigma_noise2();
        let chol = noisy_cholesky(&k, sigma2)?;
        let zv = DVector::from_column_slice(z);
        let alpha = chol.solve(&zv);
        let sigma_inv = chol.inverse();
        let w = &sigma_inv - &alpha * alpha.transpose();
        let mut d_ell = 0.0;
        let mut d_var = 0.0;
        for i in 0..n {
            for j in 0..n {
                let lag = xs[i] - xs[j];
                d_ell += w[(i, j)] * k[(i, j)] * lag * lag / (ell * ell);
                d_var += w[(i, j)] * k[(i, j)];
            }
        }
        let d_noise = sigma2 * w.trace();
        let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let nll = 0.5 * zv.dot(&alpha) + 0.5 * logdet + 0.5 * n as f64 * (2.0 * PI).ln();
        Ok((nll, [0.5 * d_ell, 0.5 * d_var, 0.5 * d_noise]))
    }

    /// Marginal-likelihood fit with the same optimizer settings as the learned model.
    pub fn fit(xs: &[f64], z: &[f64], config: &TrainConfig) -> Result<(Self, Vec<f64>)> {
        let mut flat = Self::init(z).to_flat();
        let mut state = AmsGradState::new(3);
        let mut losses = Vec::with_capacity(config.iterations + 1);
        for iteration in 0..config.iterations {
            let (nll, grad) = Self::from_flat(&flat)
                .nll_and_gradient(xs, z)
                .map_err(|_| Error::DivergedLoss { iteration })?;
            if !nll.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::DivergedLoss { iteration });
            }
            losses.push(nll);
            amsgrad_step(&mut state, &mut flat, &grad, &config.optimizer)?;
        }
        let model = Self::from_flat(&flat);
        losses.push(model.nll(xs, z)?);
        Ok((model, losses))
    }

    pub fn predict(
        &self,
        xs: &[f64],
        z: &[f64],
        xs_test: &[f64],
    ) -> Result<(DVector<f64>, RealMatrix)> {
        exact_posterior(&self.kernel(), xs, z, self.sigma_noise2(), xs_test)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rbf_gradient_matches_finite_differences() {
        let xs = [-1.0, -0.3, 0.2, 0.9, 1.4];
        let z = [0.1, -0.4, 0.3, 0.8, -0.2];
        let model = RbfModel {
            log_lengthscale: -0.2,
            log_variance: 0.1,
            log_sigma_noise2: -1.5,
        };
        let (_, grad) = model.nll_and_gradient(&xs, &z).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            let mut up = model.to_flat();
            let mut down = model.to_flat();
            up[k] += h;
            down[k] -= h;
            let fd = (RbfModel::from_flat(&up).nll(&xs, &z).unwrap()
                - RbfModel::from_flat(&down).nll(&xs, &z).unwrap())
                / (2.0 * h);
            assert_relative_eq!(grad[k], fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn tiny_noise_interpolates() {
        let xs = [-1.0, 0.0, 1.0];
        let z = [0.3, -0.1, 0.5];
        let kernel = KernelParams::rbf(0.7, 1.0).unwrap();
        let (mean, cov) = exact_posterior(&kernel, &xs, &z, 1e-10, &xs).unwrap();
        for i in 0..3 {
            assert!((mean[i] - z[i]).abs() < 1e-6);
            assert!(cov[(i, i)].abs() < 1e-6);
        }
    }

    #[test]
    fn fit_improves_likelihood() {
        let xs: Vec<f64> = (0..20).map(|i| -2.0 + 0.2 * i as f64).collect();
        let z: Vec<f64> = xs.iter().map(|x| (1.5 * x).sin()).collect();
        let cfg = TrainConfig {
            iterations: 300,
            ..Default::default()
        };
        let (_, losses) = RbfModel::fit(&xs, &z, &cfg).unwrap();
        assert!(losses.last().unwrap() < &losses[0]);
    }
}
