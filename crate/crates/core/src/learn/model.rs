//! Factorized spectral parametrization and its low-rank marginal likelihood.
//!
//! The density is `s(ω, ω′) = γ² (f(ω)† f(ω′) + f(−ω′)† f(−ω))`, so on a
//! symmetric grid `S Δω² = C C†` with `C = γ Δω (F  F₋)`,
//! `[F]_kj = conj f_j(ω_k)` and `[F₋]_kj = f_j(−ω_k)`. With the
//! real-hermitian basis `Φ̃` and `Φ̃ C = A + iB`, the kernel
//! `2·Re[(Φ̃C)(Φ̃C)†]` equals `L Lᵀ` for `L = √2 (A  B)`.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{basis_matrix, FeatureMode};
use crate::learn::net::{split_output, ForwardCache, SpectralNet};
use crate::linalg::{Complex64, ComplexMatrix, LowRankSystem, RealMatrix};
use crate::spectral::FrequencyGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub net: SpectralNet,
    pub log_gamma2: f64,
    pub log_sigma_noise2: f64,
}

/// Gradient collection shaped like [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub net: Vec<f64>,
    pub log_gamma2: f64,
    pub log_sigma_noise2: f64,
}

impl ParamGrads {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.net.clone();
        v.push(self.log_gamma2);
        v.push(self.log_sigma_noise2);
        v
    }
}

impl ModelParams {
    pub fn gamma(&self) -> f64 {
        (0.5 * self.log_gamma2).exp()
    }

    pub fn sigma_noise2(&self) -> f64 {
        self.log_sigma_noise2.exp()
    }

    pub fn rank(&self) -> usize {
        self.net.rank
    }

    /// Network weights followed by `log_gamma2` and `log_sigma_noise2`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.net.params.clone();
        v.push(self.log_gamma2);
        v.push(self.log_sigma_noise2);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let k = self.net.num_params();
        if flat.len() != k + 2 {
            return Err(Error::dim(format!(
                "expected {} parameters, got {}",
                k + 2,
                flat.len()
            )));
        }
        self.net.params.copy_from_slice(&flat[..k]);
        self.log_gamma2 = flat[k];
        self.log_sigma_noise2 = flat[k + 1];
        Ok(())
    }

    /// Induced density `γ² (f(ω)† f(ω′) + f(−ω′)† f(−ω))`.
    pub fn spectral_density(&self, omega: f64, omega_prime: f64) -> Complex64 {
        let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
            a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
        };
        let f_w = self.net.eval(omega);
        let f_wp = self.net.eval(omega_prime);
        let f_mw = self.net.eval(-omega);
        let f_mwp = self.net.eval(-omega_prime);
        (dot(&f_w, &f_wp) + dot(&f_mwp, &f_mw)) * self.log_gamma2.exp()
    }
}

fn require_symmetric(grid: &FrequencyGrid) -> Result<()> {
    if !grid.is_symmetric() {
        return Err(Error::invalid(
            "learned spectra need a symmetric frequency grid",
        ));
    }
    Ok(())
}

/// `F` and `F₋` on the grid, each scaled by `γ`.
pub fn build_learned_spectral(
    params: &ModelParams,
    grid: &FrequencyGrid,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    require_symmetric(grid)?;
    let out = params.net.forward_batch(grid.frequencies());
    Ok(spectral_blocks(params, grid, &out))
}

fn spectral_blocks(
    params: &ModelParams,
    grid: &FrequencyGrid,
    cache: &ForwardCache,
) -> (ComplexMatrix, ComplexMatrix) {
    let m = grid.m();
    let r = params.rank();
    let gamma = params.gamma();
    let out = cache.output();
    let f_at = |k: usize| -> Vec<Complex64> {
        let row: Vec<f64> = out.row(k).iter().copied().collect();
        split_output(&row, r, params.net.complex_output)
    };
    let rows: Vec<Vec<Complex64>> = (0..m).map(f_at).collect();
    let f = ComplexMatrix::from_fn(m, r, |k, j| rows[k][j].conj() * gamma);
    let f_minus = ComplexMatrix::from_fn(m, r, |k, j| {
        let neg = grid.negated_index(k).expect("symmetric grid");
        rows[neg][j] * gamma
    });
    (f, f_minus)
}

/// Real and imaginary parts of the real-hermitian basis at fixed locations.
#[derive(Debug, Clone)]
pub struct LearnedBasis {
    re: RealMatrix,
    im: RealMatrix,
}

impl LearnedBasis {
    pub fn new(grid: &FrequencyGrid, xs: &[f64]) -> Result<Self> {
        require_symmetric(grid)?;
        let phi = basis_matrix(xs, grid, FeatureMode::RealHermitian);
        Ok(Self {
            re: phi.map(|z| z.re),
            im: phi.map(|z| z.im),
        })
    }

    pub fn n(&self) -> usize {
        self.re.nrows()
    }
}

/// Split `C = γΔω (F F₋)` into real and imaginary parts (each `m × 2r`).
fn feature_factor_parts(
    params: &ModelParams,
    grid: &FrequencyGrid,
    cache: &ForwardCache,
) -> (RealMatrix, RealMatrix) {
    let (f, f_minus) = spectral_blocks(params, grid, cache);
    let r = params.rank();
    let dw = grid.delta_omega();
    let m = grid.m();
    let c = ComplexMatrix::from_fn(m, 2 * r, |k, j| if j < r { f[(k, j)] } else { f_minus[(k, j - r)] } * dw);
    (c.map(|z| z.re), c.map(|z| z.im))
}

fn assemble_l(basis: &LearnedBasis, c_re: &RealMatrix, c_im: &RealMatrix) -> RealMatrix {
    let a = &basis.re * c_re - &basis.im * c_im;
    let b = &basis.re * c_im + &basis.im * c_re;
    let (n, w) = (a.nrows(), a.ncols());
    let mut l = RealMatrix::zeros(n, 2 * w);
    l.columns_mut(0, w).copy_from(&(a * SQRT_2));
    l.columns_mut(w, w).copy_from(&(b * SQRT_2));
    l
}

/// `L = √2 (A  B) ∈ ℝ^{n × 4r}` with `Φ̃ C = A + iB`.
pub fn build_learned_features(
    params: &ModelParams,
    grid: &FrequencyGrid,
    xs: &[f64],
) -> Result<RealMatrix> {
    let basis = LearnedBasis::new(grid, xs)?;
    Ok(features_with_basis(params, grid, &basis))
}

pub fn features_with_basis(
    params: &ModelParams,
    grid: &FrequencyGrid,
    basis: &LearnedBasis,
) -> RealMatrix {
    let cache = params.net.forward_batch(grid.frequencies());
    let (c_re, c_im) = feature_factor_parts(params, grid, &cache);
    assemble_l(basis, &c_re, &c_im)
}

fn nll_from_system(sys: &LowRankSystem, z: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let alpha = sys.solve(z)?;
    let n = z.len() as f64;
    let nll = 0.5 * z.dot(&alpha) + 0.5 * sys.logdet() + 0.5 * n * (2.0 * PI).ln();
    Ok((nll, alpha))
}

/// `½ zᵀΣ⁻¹z + ½ log det Σ + (n/2) log 2π` with `Σ = L Lᵀ + σ² I`.
pub fn negative_log_marginal(
    params: &ModelParams,
    grid: &FrequencyGrid,
    xs: &[f64],
    z: &[f64],
) -> Result<f64> {
    let basis = LearnedBasis::new(grid, xs)?;
    Objective::new(grid, basis, z)?.value(params)
}

/// Negative log marginal likelihood of a fixed low-rank factor.
pub fn lowrank_nll(l: &RealMatrix, sigma2: f64, z: &[f64]) -> Result<f64> {
    if l.nrows() != z.len() {
        return Err(Error::dim(format!(
            "{} feature rows for {} targets",
            l.nrows(),
            z.len()
        )));
    }
    let sys = LowRankSystem::new(l, sigma2)?;
    Ok(nll_from_system(&sys, &DVector::from_column_slice(z))?.0)
}

pub fn gradient(
    params: &ModelParams,
    grid: &FrequencyGrid,
    xs: &[f64],
    z: &[f64],
) -> Result<ParamGrads> {
    let basis = LearnedBasis::new(grid, xs)?;
    Ok(Objective::new(grid, basis, z)?
        .value_and_gradient(params)?
        .1)
}

/// Training objective with the basis at the training inputs precomputed.
#[derive(Debug, Clone)]
pub struct Objective {
    grid: FrequencyGrid,
    basis: LearnedBasis,
    z: DVector<f64>,
}

impl Objective {
    pub fn new(grid: &FrequencyGrid, basis: LearnedBasis, z: &[f64]) -> Result<Self> {
        require_symmetric(grid)?;
        if basis.n() != z.len() {
            return Err(Error::dim(format!(
                "{} locations for {} targets",
                basis.n(),
                z.len()
            )));
        }
        if z.is_empty() {
            return Err(Error::invalid("need at least one observation"));
        }
        Ok(Self {
            grid: grid.clone(),
            basis,
            z: DVector::from_column_slice(z),
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn value(&self, params: &ModelParams) -> Result<f64> {
        let l = features_with_basis(params, &self.grid, &self.basis);
        let sys = LowRankSystem::new(&l, params.sigma_noise2())?;
        Ok(nll_from_system(&sys, &self.z)?.0)
    }

    /// Reverse-mode pass: Woodbury adjoints, then `L → C → (F, F₋) → f → net`.
    pub fn value_and_gradient(&self, params: &ModelParams) -> Result<(f64, ParamGrads)> {
        let grid = &self.grid;
        let r = params.rank();
        let cache = params.net.forward_batch(grid.frequencies());
        let (c_re, c_im) = feature_factor_parts(params, grid, &cache);
        let l = assemble_l(&self.basis, &c_re, &c_im);
        let sigma2 = params.sigma_noise2();
        let sys = LowRankSystem::new(&l, sigma2)?;
        let (nll, alpha) = nll_from_system(&sys, &self.z)?;

        // ∂/∂L = Σ⁻¹L − α αᵀ L, with Σ⁻¹L = L A⁻¹
        let a_inv = sys.inner_inverse();
        let lt_alpha = l.tr_mul(&alpha);
        let grad_l = &l * &a_inv - &alpha * lt_alpha.transpose();

        // ∂/∂σ² = ½ tr Σ⁻¹ − ½ αᵀα, tr Σ⁻¹ = (n − p)/σ² + tr A⁻¹
        let (n, p) = (l.nrows() as f64, l.ncols() as f64);
        let tr_inv = (n - p) / sigma2 + a_inv.trace();
        let d_log_sigma2 = sigma2 * (0.5 * tr_inv - 0.5 * alpha.norm_squared());

        let w = 2 * r;
        let g_a = grad_l.columns(0, w) * SQRT_2;
        let g_b = grad_l.columns(w, w) * SQRT_2;
        let (phi_re, phi_im) = (&self.basis.re, &self.basis.im);
        let g_c_re = phi_re.tr_mul(&g_a) + phi_im.tr_mul(&g_b);
        let g_c_im = phi_re.tr_mul(&g_b) - phi_im.tr_mul(&g_a);

        // C ∝ γ = exp(log_gamma2 / 2)
        let d_log_gamma2 =
            0.5 * (g_c_re.component_mul(&c_re).sum() + g_c_im.component_mul(&c_im).sum());

        let scale = params.gamma() * grid.delta_omega();
        let m = grid.m();
        let mut g_out = RealMatrix::zeros(m, params.net.output_dim());
        for k in 0..m {
            let neg = grid.negated_index(k).expect("symmetric grid");
            for j in 0..r {
                // [F]_kj = conj f_j(ω_k)
                g_out[(k, j)] += scale * g_c_re[(k, j)];
                // [F₋]_kj = f_j(ω_neg)
                g_out[(neg, j)] += scale * g_c_re[(k, r + j)];
                if params.net.complex_output {
                    g_out[(k, r + j)] -= scale * g_c_im[(k, j)];
                    g_out[(neg, r + j)] += scale * g_c_im[(k, r + j)];
                }
            }
        }
        let net = params.net.backward(&cache, &g_out);
        Ok((
            nll,
            ParamGrads {
                net,
                log_gamma2: d_log_gamma2,
                log_sigma_noise2: d_log_sigma2,
            },
        ))
    }
}
