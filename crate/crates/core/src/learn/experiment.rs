//! Synthetic kernel-learning experiment on data drawn from the Silverman kernel.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram, KernelParams};
use crate::learn::baseline::{exact_posterior, RbfModel};
use crate::learn::train::{posterior_predict, train, TrainConfig};
use crate::simulate::{standard_normals, uniform_open01, SeededRng};
use crate::spectral::FrequencyGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub a: f64,
    pub n: usize,
    /// Training inputs are uniform on `[−x_range, x_range]`.
    pub x_range: f64,
    pub noise_std: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            a: 0.5,
            n: 50,
            x_range: 5.0,
            noise_std: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub xs: Vec<f64>,
    pub z: Vec<f64>,
}

/// Draws `z = f + ε` with `f ~ GP(0, k_LS)` sampled through a dense Cholesky
/// factor. Inputs come from stream 1 of `seed`, function values and noise
/// from stream 2.
pub fn synthetic_dataset(config: &SyntheticConfig, seed: u64) -> Result<Dataset> {
    if config.n == 0 || !(config.x_range > 0.0) || !(config.noise_std >= 0.0) {
        return Err(Error::invalid(
            "synthetic dataset needs n ≥ 1, x_range > 0, noise_std ≥ 0",
        ));
    }
    let seeded = SeededRng::new(seed);
    let mut rng = seeded.stream(1);
    let xs: Vec<f64> = (0..config.n)
        .map(|_| config.x_range * (2.0 * uniform_open01(&mut rng) - 1.0))
        .collect();
    let mut k = gram(&KernelParams::locally_stationary(config.a)?, &xs)?;
    for i in 0..config.n {
        k[(i, i)] += 1e-10;
    }
    let chol = k.cholesky().ok_or(Error::IndefiniteInput {
        min_eigenvalue: f64::NAN,
        tolerance: 1e-10,
    })?;
    let mut rng = seeded.stream(2);
    let f = chol.l() * DVector::from_vec(standard_normals(&mut rng, config.n));
    let noise = standard_normals(&mut rng, config.n);
    let z = f
        .iter()
        .zip(&noise)
        .map(|(f, e)| f + config.noise_std * e)
        .collect();
    Ok(Dataset { xs, z })
}

pub fn linspace(lo: f64, hi: f64, t: usize) -> Vec<f64> {
    match t {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..t)
            .map(|i| lo + (hi - lo) * i as f64 / (t - 1) as f64)
            .collect(),
    }
}

/// `‖μ − μ_ref‖₂ / ‖μ_ref‖₂`.
pub fn mean_relative_error(mean: &DVector<f64>, reference: &DVector<f64>) -> Result<f64> {
    if mean.len() != reference.len() {
        return Err(Error::dim(format!(
            "{} vs {} test points",
            mean.len(),
            reference.len()
        )));
    }
    let denom = reference.norm();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((mean - reference).norm() / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningExperiment {
    pub data: SyntheticConfig,
    pub m: usize,
    pub omega_max: f64,
    pub rank: usize,
    pub train: TrainConfig,
    pub test_points: usize,
    pub test_range: f64,
}

impl Default for LearningExperiment {
    fn default() -> Self {
        Self {
            data: SyntheticConfig::default(),
            m: 255,
            omega_max: 10.0,
            rank: 8,
            train: TrainConfig::default(),
            test_points: 100,
            test_range: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub learned_error: f64,
    pub rbf_error: f64,
    pub initial_nll: f64,
    pub final_nll: f64,
}

impl LearningExperiment {
    /// One seed: data, learned model, RBF baseline, and the true-kernel
    /// posterior at `test_points` equispaced inputs.
    pub fn run_trial(&self, seed: u64) -> Result<TrialResult> {
        let data = synthetic_dataset(&self.data, seed)?;
        let grid = FrequencyGrid::symmetric(self.m, self.omega_max)?;
        let xs_test = linspace(-self.test_range, self.test_range, self.test_points);

        let truth = KernelParams::locally_stationary(self.data.a)?;
        let noise2 = self.data.noise_std * self.data.noise_std;
        let (mu_true, _) = exact_posterior(&truth, &data.xs, &data.z, noise2, &xs_test)?;

        let config = TrainConfig {
            seed,
            ..self.train.clone()
        };
        let outcome = train(&data.xs, &data.z, &grid, self.rank, &config)?;
        let (mu_learned, _) = posterior_predict(&outcome.cache, &xs_test)?;

        let (rbf, _) = RbfModel::fit(&data.xs, &data.z, &config)?;
        let (mu_rbf, _) = rbf.predict(&data.xs, &data.z, &xs_test)?;

        Ok(TrialResult {
            seed,
            learned_error: mean_relative_error(&mu_learned, &mu_true)?,
            rbf_error: mean_relative_error(&mu_rbf, &mu_true)?,
            initial_nll: outcome.initial_nll(),
            final_nll: outcome.final_nll(),
        })
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
