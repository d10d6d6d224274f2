use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::build_learned_features;
use crate::learn::model::{features_with_basis, LearnedBasis, ModelParams, Objective};
use crate::learn::net::SpectralNet;
use crate::learn::optim::{amsgrad_step, AmsGradConfig, AmsGradState};
use crate::linalg::{LowRankSystem, RealMatrix};
use crate::simulate::SeededRng;
use crate::spectral::FrequencyGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: AmsGradConfig,
    pub iterations: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub complex_output: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: AmsGradConfig::default(),
            iterations: 4000,
            seed: 0,
            hidden: vec![128, 128],
            complex_output: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.optimizer.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

pub(crate) fn variance(z: &[f64]) -> f64 {
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Seeded initialization.
///
/// Hidden weights are `N(0, 1/fan_in)` with the input frequency scaled by
/// `1/ω_max`; `γ²` is set so the prior variance at `x = 0` equals the sample
/// variance of `z`, and `σ²_noise = 0.01·var(z)`.
pub fn init_params(
    grid: &FrequencyGrid,
    rank: usize,
    z: &[f64],
    config: &TrainConfig,
) -> Result<ModelParams> {
    if z.is_empty() {
        return Err(Error::invalid("need at least one observation"));
    }
    let mut rng = SeededRng::new(config.seed).stream(0);
    let net = SpectralNet::init(
        &config.hidden,
        rank,
        config.complex_output,
        1.0 / grid.omega_max(),
        &mut rng,
    )?;
    let var_z = variance(z).max(f64::MIN_POSITIVE);
    let mut params = ModelParams {
        net,
        log_gamma2: 0.0,
        log_sigma_noise2: (0.01 * var_z).ln(),
    };
    let l0 = build_learned_features(&params, grid, &[0.0])?;
    let prior0 = l0.norm_squared();
    if prior0 > 0.0 {
        params.log_gamma2 = (var_z / prior0).ln();
    }
    Ok(params)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub cache: PosteriorCache,
    /// Objective before each step; the last entry is at the returned parameters.
    pub losses: Vec<f64>,
}

impl TrainOutcome {
    pub fn initial_nll(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_nll(&self) -> f64 {
        *self
            .losses
            .last()
            .expect("losses always hold the final value")
    }
}

pub fn train(
    xs: &[f64],
    z: &[f64],
    grid: &FrequencyGrid,
    rank: usize,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if z.iter().chain(xs).any(|v| !v.is_finite()) {
        return Err(Error::invalid("training data must be finite"));
    }
    let params = init_params(grid, rank, z, config)?;
    train_from(params, xs, z, grid, config)
}

/// Runs `config.iterations` full-batch AMSGrad steps from `params`.
pub fn train_from(
    mut params: ModelParams,
    xs: &[f64],
    z: &[f64],
    grid: &FrequencyGrid,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let objective = Objective::new(grid, LearnedBasis::new(grid, xs)?, z)?;
    let mut flat = params.to_flat();
    let mut state = AmsGradState::new(flat.len());
    let mut losses = Vec::with_capacity(config.iterations + 1);
    for iteration in 0..config.iterations {
        let (nll, grads) = objective
            .value_and_gradient(&params)
            .map_err(|e| diverged(e, iteration))?;
        let grads = grads.to_flat();
        if !nll.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::DivergedLoss { iteration });
        }
        losses.push(nll);
        amsgrad_step(&mut state, &mut flat, &grads, &config.optimizer)?;
        params.set_flat(&flat)?;
    }
    let final_nll = objective
        .value(&params)
        .map_err(|e| diverged(e, config.iterations))?;
    if !final_nll.is_finite() {
        return Err(Error::DivergedLoss {
            iteration: config.iterations,
        });
    }
    losses.push(final_nll);
    let cache = PosteriorCache::compute(&params, grid, xs, z)?;
    Ok(TrainOutcome {
        params,
        cache,
        losses,
    })
}

fn diverged(err: Error, iteration: usize) -> Error {
    match err {
        Error::SingularInnerSystem { .. } | Error::InvalidParameter(_) => {
            Error::DivergedLoss { iteration }
        }
        other => other,
    }
}

/// `β = Lᵀ Σ⁻¹ z` and `Q = I − Lᵀ Σ⁻¹ L` for the training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorCache {
    pub beta: DVector<f64>,
    pub q: RealMatrix,
    pub params: ModelParams,
    pub grid: crate::spectral::GridSpec,
}

impl PosteriorCache {
    pub fn compute(
        params: &ModelParams,
        grid: &FrequencyGrid,
        xs: &[f64],
        z: &[f64],
    ) -> Result<Self> {
        let basis = LearnedBasis::new(grid, xs)?;
        let l = features_with_basis(params, grid, &basis);
        let (beta, q) = lowrank_posterior(&l, params.sigma_noise2(), z)?;
        Ok(Self {
            beta,
            q,
            params: params.clone(),
            grid: grid.spec(),
        })
    }

    pub fn frequency_grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::from_spec(&self.grid)
    }
}

/// `(β, Q)` for a fixed training factor `L`.
///
/// Uses `Lᵀ Σ⁻¹ = A⁻¹ Lᵀ` and `Q = σ² A⁻¹` with `A = LᵀL + σ²I`, which keeps
/// `Q` symmetric PSD even for tiny noise.
pub fn lowrank_posterior(
    l: &RealMatrix,
    sigma2: f64,
    z: &[f64],
) -> Result<(DVector<f64>, RealMatrix)> {
    if l.nrows() != z.len() {
        return Err(Error::dim(format!(
            "{} feature rows for {} targets",
            l.nrows(),
            z.len()
        )));
    }
    let sys = LowRankSystem::new(l, sigma2)?;
    let beta = sys.solve_inner(&l.tr_mul(&DVector::from_column_slice(z)));
    let a_inv = sys.inner_inverse();
    let q = (&a_inv + a_inv.transpose()) * (0.5 * sigma2);
    Ok((beta, q))
}

/// Mean `L* β` and covariance `L* Q L*ᵀ` at test locations.
pub fn posterior_predict(
    cache: &PosteriorCache,
    xs_test: &[f64],
) -> Result<(DVector<f64>, RealMatrix)> {
    if xs_test.is_empty() {
        return Ok((DVector::zeros(0), RealMatrix::zeros(0, 0)));
    }
    let grid = cache.frequency_grid()?;
    let l_star = build_learned_features(&cache.params, &grid, xs_test)?;
    Ok(predict_with_features(&l_star, &cache.beta, &cache.q))
}

pub fn predict_with_features(
    l_star: &RealMatrix,
    beta: &DVector<f64>,
    q: &RealMatrix,
) -> (DVector<f64>, RealMatrix) {
    let mean = l_star * beta;
    let cov = l_star * q * l_star.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    (mean, cov)
}
