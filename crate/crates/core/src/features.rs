//! Regular Fourier feature maps and the low-rank kernels they induce.
//!
//! A [`FeatureFactor`] holds a matrix `C` whose rows are indexed by grid
//! frequencies. The spectral weights are modelled as `W = C·E`:
//!
//! * [`FeatureMode::Complex`]: `E` is circular complex Gaussian, the process
//!   is `Z(x) = α(x)·W` and `k(x, x′) = φ(x)φ(x′)†` with `φ = α C`.
//! * [`FeatureMode::RealHermitian`]: `E` is real standard normal and
//!   `Z(x) = 2·Re[α̃(x)·W]` on the nonnegative grid (origin entry halved).
//!   `C C† = S Δω²` carries the covariance and `C Cᵀ` the pseudo-covariance
//!   `s(ω_i, −ω_j) Δω²` of the weights, so the kernel is
//!   `2·Re[φ̃ φ̃′†] + 2·Re[φ̃ φ̃′ᵀ]`. The second term is zero for circular
//!   weights, leaving `2·Re[φ̃ φ̃′†]`.
//! * [`FeatureMode::RealCosine`]: real weights, `Z(x) = 2·α̃_cos(x)·W` and
//!   `k = 4·α̃ C Cᵀ α̃′ᵀ`.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_psd_factor, symmetric_psd_factor, Complex64, ComplexMatrix, HermitianPsd, RealMatrix,
};
use crate::simulate::{uniform_open01, SeededRng};
use crate::spectral::{
    build_pseudo_matrix, build_spectral_matrix, FrequencyGrid, SpectralDensityModel,
};

/// Relative imaginary residue tolerated in kernels promised to be real.
pub const REALNESS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    Complex,
    RealHermitian,
    RealCosine,
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complex" => Ok(Self::Complex),
            "real_hermitian" | "real-hermitian" => Ok(Self::RealHermitian),
            "real_cosine" | "real-cosine" | "cosine" => Ok(Self::RealCosine),
            other => Err(Error::Parse(format!("unknown feature mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeatureFactor {
    c: ComplexMatrix,
    grid: FrequencyGrid,
    mode: FeatureMode,
}

impl FeatureFactor {
    /// Wraps a factor directly. In the real modes `c` multiplies real noise.
    pub fn new(c: ComplexMatrix, grid: FrequencyGrid, mode: FeatureMode) -> Result<Self> {
        if c.nrows() != grid.m() {
            return Err(Error::dim(format!(
                "factor has {} rows for {} frequencies",
                c.nrows(),
                grid.m()
            )));
        }
        if mode != FeatureMode::Complex && grid.is_symmetric() {
            return Err(Error::invalid(
                "real feature modes use the nonnegative grid",
            ));
        }
        if mode == FeatureMode::RealCosine && c.iter().any(|z| z.im != 0.0) {
            return Err(Error::invalid("cosine mode needs a real factor"));
        }
        Ok(Self { c, grid, mode })
    }

    /// Real-hermitian factor for circular weights with covariance `C C†`.
    ///
    /// Stored as `[C, iC]/√2` so that real noise reproduces circular weights.
    pub fn circular_real_hermitian(c: &ComplexMatrix, grid: FrequencyGrid) -> Result<Self> {
        let q = c.ncols();
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let mut aug = ComplexMatrix::zeros(c.nrows(), 2 * q);
        aug.columns_mut(0, q)
            .copy_from(&(c * Complex64::new(scale, 0.0)));
        aug.columns_mut(q, q)
            .copy_from(&(c * Complex64::new(0.0, scale)));
        Self::new(aug, grid, FeatureMode::RealHermitian)
    }

    /// Factorizes the spectral matrix of `model` on `grid`, scaled by `Δω²`.
    pub fn from_density(
        grid: &FrequencyGrid,
        model: &SpectralDensityModel,
        mode: FeatureMode,
        jitter: f64,
    ) -> Result<Self> {
        let dw2 = grid.delta_omega().powi(2);
        let s = build_spectral_matrix(grid, model).scaled(dw2);
        let c = match mode {
            FeatureMode::Complex => hermitian_psd_factor(&s, jitter)?,
            FeatureMode::RealCosine => {
                check_real_weights(&s, &build_pseudo_matrix(grid, model), dw2)?;
                let real = s.matrix().map(|z| z.re);
                symmetric_psd_factor(&real, jitter)?.map(|v| Complex64::new(v, 0.0))
            }
            FeatureMode::RealHermitian => {
                let p = build_pseudo_matrix(grid, model) * Complex64::new(dw2, 0.0);
                augmented_factor(&s, &p, jitter)?
            }
        };
        Self::new(c, grid.clone(), mode)
    }

    pub fn c(&self) -> &ComplexMatrix {
        &self.c
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    pub fn rank(&self) -> usize {
        self.c.ncols()
    }

    /// `C C†`, the covariance of the spectral weights.
    pub fn weight_covariance(&self) -> ComplexMatrix {
        &self.c * self.c.adjoint()
    }
}

fn check_real_weights(s: &HermitianPsd, p: &ComplexMatrix, dw2: f64) -> Result<()> {
    let scale = s.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let imag = s.matrix().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let mismatch = s
        .matrix()
        .iter()
        .zip(p.iter())
        .map(|(a, b)| (a - b * dw2).norm())
        .fold(0.0, f64::max);
    let tolerance = REALNESS_TOL * scale;
    if imag.max(mismatch) > tolerance {
        return Err(Error::NonRealKernel {
            residue: imag.max(mismatch),
            tolerance,
        });
    }
    Ok(())
}

/// Factor `C` with `C C† = S` and `C Cᵀ = P` through the real covariance of
/// `(Re W, Im W)`.
fn augmented_factor(s: &HermitianPsd, p: &ComplexMatrix, jitter: f64) -> Result<ComplexMatrix> {
    let m = s.dim();
    let s = s.matrix();
    let mut r = RealMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            let (sij, pij) = (s[(i, j)], p[(i, j)]);
            r[(i, j)] = 0.5 * (sij.re + pij.re);
            r[(i, m + j)] = 0.5 * (pij.im - sij.im);
            r[(m + i, j)] = 0.5 * (sij.im + pij.im);
            r[(m + i, m + j)] = 0.5 * (sij.re - pij.re);
        }
    }
    let g = symmetric_psd_factor(&r, 0.5 * jitter)?;
    Ok(ComplexMatrix::from_fn(m, g.ncols(), |i, k| {
        Complex64::new(g[(i, k)], g[(m + i, k)])
    }))
}

/// Basis row `α(x)` (complex), `α̃(x)` (real-hermitian) or `α̃_cos(x)`.
pub fn fourier_basis(x: f64, grid: &FrequencyGrid, mode: FeatureMode) -> Vec<Complex64> {
    let zero = grid.zero_index();
    grid.frequencies()
        .iter()
        .enumerate()
        .map(|(k, w)| match mode {
            FeatureMode::Complex => Complex64::from_polar(1.0, w * x),
            FeatureMode::RealHermitian if Some(k) == zero => Complex64::new(0.5, 0.0),
            FeatureMode::RealHermitian => Complex64::from_polar(1.0, w * x),
            FeatureMode::RealCosine if Some(k) == zero => Complex64::new(0.5, 0.0),
            FeatureMode::RealCosine => Complex64::new((w * x).cos(), 0.0),
        })
        .collect()
}

/// `n × m` matrix whose rows are [`fourier_basis`] rows.
pub fn basis_matrix(xs: &[f64], grid: &FrequencyGrid, mode: FeatureMode) -> ComplexMatrix {
    let m = grid.m();
    let mut phi = ComplexMatrix::zeros(xs.len(), m);
    for (i, x) in xs.iter().enumerate() {
        for (k, v) in fourier_basis(*x, grid, mode).into_iter().enumerate() {
            phi[(i, k)] = v;
        }
    }
    phi
}

#[derive(Debug, Clone)]
pub struct LowRankKernel {
    l: ComplexMatrix,
    locations: Vec<f64>,
    mode: FeatureMode,
}

impl LowRankKernel {
    pub fn new(l: ComplexMatrix, locations: Vec<f64>, mode: FeatureMode) -> Result<Self> {
        if l.nrows() != locations.len() {
            return Err(Error::dim(format!(
                "{} feature rows for {} locations",
                l.nrows(),
                locations.len()
            )));
        }
        Ok(Self { l, locations, mode })
    }

    pub fn features(&self) -> &ComplexMatrix {
        &self.l
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    /// Real feature matrix `R` with `kernel_matrix() = R Rᵀ`, where one exists
    /// without doubling columns (real modes).
    pub fn real_features(&self) -> Option<RealMatrix> {
        match self.mode {
            FeatureMode::Complex => None,
            FeatureMode::RealHermitian | FeatureMode::RealCosine => {
                Some(self.l.map(|z| 2.0 * z.re))
            }
        }
    }
}

/// Rows `φ(x_i) = basis(x_i) · C`.
///
/// Locations beyond `π/Δω` alias; this is logged as a warning, or returned as
/// [`Error::AliasingViolation`] when `strict` is set.
pub fn build_feature_matrix(
    xs: &[f64],
    factor: &FeatureFactor,
    strict: bool,
) -> Result<LowRankKernel> {
    let x_max = xs.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let bound = factor.grid().aliasing_bound();
    if !xs.is_empty() && x_max >= bound {
        if strict {
            return Err(Error::AliasingViolation { x_max, bound });
        }
        log::warn!(
            "max |x| = {x_max} exceeds the aliasing bound {bound}; the approximation is periodic"
        );
    }
    let phi = basis_matrix(xs, factor.grid(), factor.mode());
    LowRankKernel::new(phi * factor.c(), xs.to_vec(), factor.mode())
}

/// `L L†` without any realness requirement.
pub fn complex_gram(lr: &LowRankKernel) -> ComplexMatrix {
    lr.l.clone() * lr.l.adjoint()
}

/// Real kernel matrix for the mode of `lr`.
pub fn kernel_matrix(lr: &LowRankKernel) -> Result<RealMatrix> {
    match lr.mode {
        FeatureMode::Complex => {
            let re = lr.l.map(|z| z.re);
            let im = lr.l.map(|z| z.im);
            let real = &re * re.transpose() + &im * im.transpose();
            let imag = &im * re.transpose() - &re * im.transpose();
            let scale = real.amax();
            let residue = imag.amax();
            let tolerance = REALNESS_TOL * scale;
            if residue > tolerance {
                return Err(Error::NonRealKernel { residue, tolerance });
            }
            Ok(real)
        }
        FeatureMode::RealCosine => {
            let residue = lr.l.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            if residue > 0.0 {
                return Err(Error::NonRealKernel {
                    residue,
                    tolerance: 0.0,
                });
            }
            let re = lr.l.map(|z| z.re);
            Ok(&re * re.transpose() * 4.0)
        }
        FeatureMode::RealHermitian => {
            // 2 Re[L L†] + 2 Re[L Lᵀ] = 4 Re(L) Re(L)ᵀ
            let re = lr.l.map(|z| z.re);
            Ok(&re * re.transpose() * 4.0)
        }
    }
}

/// Direct double Riemann sum `Σ_j Σ_k exp(i(ω_j x − ω_k x′)) s(ω_j, ω_k) Δω²`.
///
/// A nonnegative grid is mirrored to `{−(m−1)Δω, …, (m−1)Δω}` first, which is
/// the frequency set the real modes sum over implicitly.
pub fn riemann_kernel_oracle_complex(
    xs: &[f64],
    grid: &FrequencyGrid,
    model: &SpectralDensityModel,
) -> ComplexMatrix {
    let w = grid.mirrored();
    let dw2 = grid.delta_omega().powi(2);
    let n = xs.len();
    let s: Vec<Vec<Complex64>> = w
        .iter()
        .map(|wj| w.iter().map(|wk| model.eval(*wj, *wk)).collect())
        .collect();
    let phases: Vec<Vec<Complex64>> = xs
        .iter()
        .map(|x| {
            w.iter()
                .map(|wj| Complex64::from_polar(1.0, wj * x))
                .collect()
        })
        .collect();
    let mut k = ComplexMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, e_j) in phases[a].iter().enumerate() {
                for (k_idx, e_k) in phases[b].iter().enumerate() {
                    acc += e_j * e_k.conj() * s[j][k_idx];
                }
            }
            k[(a, b)] = acc * dw2;
        }
    }
    k
}

pub fn riemann_kernel_oracle(
    xs: &[f64],
    grid: &FrequencyGrid,
    model: &SpectralDensityModel,
) -> RealMatrix {
    riemann_kernel_oracle_complex(xs, grid, model).map(|z| z.re)
}

/// Draws frequency pairs from a normalized two-dimensional density.
pub trait DensitySampler {
    /// `∫∫ s(ω, ω′) dω dω′`, the `σ²` of the naive estimator.
    fn total_mass(&self) -> f64;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64);
}

/// Inverse-CDF sampler over a fine midpoint discretization of `[−h, h]²`.
#[derive(Debug, Clone)]
pub struct GridDensitySampler {
    half_width: f64,
    cells: usize,
    cumulative: Vec<f64>,
    mass: f64,
}

impl GridDensitySampler {
    pub fn new(model: &SpectralDensityModel, half_width: f64, cells: usize) -> Result<Self> {
        if !(half_width > 0.0) || cells == 0 {
            return Err(Error::invalid(
                "sampler needs a positive half width and at least one cell",
            ));
        }
        let h = 2.0 * half_width / cells as f64;
        let centre = |i: usize| -half_width + (i as f64 + 0.5) * h;
        let mut cumulative = Vec::with_capacity(cells * cells);
        let mut acc = 0.0;
        for i in 0..cells {
            for j in 0..cells {
                let v = model.eval(centre(i), centre(j));
                if v.im != 0.0 || v.re < 0.0 {
                    return Err(Error::invalid(
                        "naive sampling needs a real nonnegative density",
                    ));
                }
                acc += v.re * h * h;
                cumulative.push(acc);
            }
        }
        if !(acc > 0.0) {
            return Err(Error::invalid("density has no mass on the sampling window"));
        }
        Ok(Self {
            half_width,
            cells,
            cumulative,
            mass: acc,
        })
    }
}

impl DensitySampler for GridDensitySampler {
    fn total_mass(&self) -> f64 {
        self.mass
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let target = uniform_open01(rng) * self.mass;
        let idx = self
            .cumulative
            .partition_point(|c| *c < target)
            .min(self.cumulative.len() - 1);
        let h = 2.0 * self.half_width / self.cells as f64;
        let (i, j) = (idx / self.cells, idx % self.cells);
        let w = -self.half_width + (i as f64 + uniform_open01(rng)) * h;
        let wp = -self.half_width + (j as f64 + uniform_open01(rng)) * h;
        (w, wp)
    }
}

/// Naive Monte Carlo estimator `(σ²/m) Σ_j exp(i(Ω_j x − Ω′_j x′))` with
/// `(Ω_j, Ω′_j)` drawn from the normalized density. Not PSD in general.
pub fn naive_mc_kernel<S: DensitySampler>(
    xs: &[f64],
    sampler: &S,
    m_samples: usize,
    seed: u64,
) -> ComplexMatrix {
    let mut rng = SeededRng::new(seed).stream(0);
    let draws: Vec<(f64, f64)> = (0..m_samples).map(|_| sampler.sample(&mut rng)).collect();
    let scale = if m_samples == 0 {
        0.0
    } else {
        sampler.total_mass() / m_samples as f64
    };
    ComplexMatrix::from_fn(xs.len(), xs.len(), |a, b| {
        let acc: Complex64 = draws
            .iter()
            .map(|(w, wp)| Complex64::from_polar(1.0, w * xs[a] - wp * xs[b]))
            .sum();
        acc * scale
    })
}

/// Relative root sum of squared errors `‖K̂ − K‖_F / ‖K‖_F`.
pub fn relative_error(k_hat: &RealMatrix, k_exact: &RealMatrix) -> Result<f64> {
    if k_hat.shape() != k_exact.shape() {
        return Err(Error::dim(format!(
            "shapes {:?} and {:?} differ",
            k_hat.shape(),
            k_exact.shape()
        )));
    }
    let reference = k_exact.norm();
    if reference == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((k_hat - k_exact).norm() / reference)
}

pub fn max_abs_error(k_hat: &RealMatrix, k_exact: &RealMatrix) -> Result<f64> {
    if k_hat.shape() != k_exact.shape() {
        return Err(Error::dim(format!(
            "shapes {:?} and {:?} differ",
            k_hat.shape(),
            k_exact.shape()
        )));
    }
    Ok((k_hat - k_exact).amax())
}

/// Real part of the Hermitian part of `k`, used to inspect naive estimators.
pub fn symmetrized_real_part(k: &ComplexMatrix) -> RealMatrix {
    let herm = (k + k.adjoint()) * Complex64::new(0.5, 0.0);
    herm.map(|z| z.re)
}

/// Column sums of `C`, the feature row at `x = 0` in complex mode.
pub fn column_sums(c: &ComplexMatrix) -> DVector<Complex64> {
    DVector::from_iterator(c.ncols(), c.column_iter().map(|col| col.sum()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram, KernelParams};
    use crate::linalg::{min_symmetric_eigenvalue, real_trace};
    use crate::spectral::HarmonizableMixture;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ls() -> SpectralDensityModel {
        SpectralDensityModel::locally_stationary(1.0).unwrap()
    }

    #[test]
    fn basis_at_origin() {
        let g = FrequencyGrid::symmetric(5, 2.0).unwrap();
        assert!(fourier_basis(0.0, &g, FeatureMode::Complex)
            .iter()
            .all(|z| *z == Complex64::new(1.0, 0.0)));
        let g = FrequencyGrid::nonnegative(3, 3.0).unwrap();
        let row = fourier_basis(0.0, &g, FeatureMode::RealCosine);
        assert_eq!(
            row.iter().map(|z| z.re).collect::<Vec<_>>(),
            vec![0.5, 1.0, 1.0]
        );
        let row = fourier_basis(0.3, &g, FeatureMode::RealHermitian);
        assert_eq!(row[0], Complex64::new(0.5, 0.0));
        assert_relative_eq!(row[2].im, (0.6f64).sin(), max_relative = 1e-15);
    }

    #[test]
    fn cosine_basis_half_period() {
        let g = FrequencyGrid::nonnegative(4, 2.0).unwrap();
        let w1 = g.frequencies()[1];
        let row = fourier_basis(PI / w1, &g, FeatureMode::RealCosine);
        assert_relative_eq!(row[1].re, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn feature_matrix_at_origin_is_column_sums() {
        let g = FrequencyGrid::symmetric(11, 4.0).unwrap();
        let f = FeatureFactor::from_density(&g, &ls(), FeatureMode::Complex, 0.0).unwrap();
        let lr = build_feature_matrix(&[0.0], &f, true).unwrap();
        let sums = column_sums(f.c());
        for k in 0..f.rank() {
            assert!((lr.features()[(0, k)] - sums[k]).norm() < 1e-15);
        }
    }

    #[test]
    fn empty_locations() {
        let g = FrequencyGrid::nonnegative(8, 4.0).unwrap();
        let f = FeatureFactor::from_density(&g, &ls(), FeatureMode::RealCosine, 0.0).unwrap();
        let lr = build_feature_matrix(&[], &f, true).unwrap();
        assert_eq!(lr.n(), 0);
        assert_eq!(kernel_matrix(&lr).unwrap().shape(), (0, 0));
    }

    #[test]
    fn strict_aliasing_is_an_error() {
        let g = FrequencyGrid::nonnegative(20, 5.0).unwrap();
        let f = FeatureFactor::from_density(&g, &ls(), FeatureMode::RealCosine, 0.0).unwrap();
        assert!(matches!(
            build_feature_matrix(&[13.0], &f, true),
            Err(Error::AliasingViolation { .. })
        ));
        assert!(build_feature_matrix(&[13.0], &f, false).is_ok());
    }

    #[test]
    fn factor_reconstructs_scaled_spectral_matrix() {
        let g = FrequencyGrid::nonnegative(20, 5.0).unwrap();
        let dw2 = g.delta_omega().powi(2);
        let s = build_spectral_matrix(&g, &ls()).scaled(dw2);
        for mode in [
            FeatureMode::Complex,
            FeatureMode::RealCosine,
            FeatureMode::RealHermitian,
        ] {
            let f = FeatureFactor::from_density(&g, &ls(), mode, 0.0).unwrap();
            let cc = f.weight_covariance();
            let dev = (&cc - s.matrix())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(dev <= 1e-10, "{mode:?}: {dev}");
            assert!((&cc - s.matrix()).norm() <= 1e-10 * s.matrix().norm());
        }
    }

    #[test]
    fn real_hermitian_factor_carries_pseudo_covariance() {
        let g = FrequencyGrid::nonnegative(30, 20.0).unwrap();
        let model = SpectralDensityModel::HarmonizableMixture(HarmonizableMixture::reference());
        let f = FeatureFactor::from_density(&g, &model, FeatureMode::RealHermitian, 0.0).unwrap();
        let p = build_pseudo_matrix(&g, &model) * Complex64::new(g.delta_omega().powi(2), 0.0);
        let ct = f.c() * f.c().transpose();
        assert!((&ct - &p).norm() <= 1e-10 * p.norm());
    }

    #[test]
    fn cosine_mode_rejects_complex_weights() {
        let g = FrequencyGrid::nonnegative(30, 20.0).unwrap();
        let model = SpectralDensityModel::HarmonizableMixture(HarmonizableMixture::reference());
        assert!(FeatureFactor::from_density(&g, &model, FeatureMode::RealCosine, 0.0).is_err());
    }

    #[test]
    fn single_row_gram_is_rank_one() {
        let g = FrequencyGrid::nonnegative(4, 2.0).unwrap();
        let c = ComplexMatrix::from_fn(4, 2, |i, j| {
            Complex64::new(0.1 * (i + j) as f64, 0.05 * i as f64)
        });
        let f = FeatureFactor::circular_real_hermitian(&c, g.clone()).unwrap();
        let lr = build_feature_matrix(&[0.7], &f, true).unwrap();
        let k = kernel_matrix(&lr).unwrap();
        let phi =
            DVector::from_vec(fourier_basis(0.7, &g, FeatureMode::RealHermitian)).transpose() * &c;
        assert_relative_eq!(k[(0, 0)], 2.0 * phi.norm_squared(), max_relative = 1e-13);
        let lr = build_feature_matrix(&[0.7, 0.7], &f, true).unwrap();
        let k = kernel_matrix(&lr).unwrap();
        assert!(k.clone().symmetric_eigenvalues().min() > -1e-14);
        assert_relative_eq!(k[(0, 1)], k[(0, 0)], max_relative = 1e-14);
    }

    #[test]
    fn circular_real_hermitian_matches_two_re_gram() {
        let g = FrequencyGrid::nonnegative(6, 3.0).unwrap();
        let c = ComplexMatrix::from_fn(6, 3, |i, j| {
            Complex64::new((i as f64 - j as f64) * 0.1, 0.02 * (i * j) as f64)
        });
        let f = FeatureFactor::circular_real_hermitian(&c, g.clone()).unwrap();
        let xs = [0.0, 0.4, -1.1];
        let k = kernel_matrix(&build_feature_matrix(&xs, &f, true).unwrap()).unwrap();
        let l = basis_matrix(&xs, &g, FeatureMode::RealHermitian) * &c;
        let expected = (&l * l.adjoint()).map(|z| 2.0 * z.re);
        assert!((k - expected).amax() < 1e-14);
    }

    #[test]
    fn silverman_cosine_close_to_exact() {
        let g = FrequencyGrid::nonnegative(20, 5.0).unwrap();
        let f = FeatureFactor::from_density(&g, &ls(), FeatureMode::RealCosine, 0.0).unwrap();
        let xs: Vec<f64> = (0..200).map(|i| i as f64 * 0.0125).collect();
        let k = kernel_matrix(&build_feature_matrix(&xs, &f, true).unwrap()).unwrap();
        let exact = gram(&KernelParams::locally_stationary(1.0).unwrap(), &xs).unwrap();
        assert!(max_abs_error(&k, &exact).unwrap() < 5e-3);
    }

    #[test]
    fn complex_mode_on_nonnegative_grid_is_not_real() {
        let g = FrequencyGrid::nonnegative(10, 5.0).unwrap();
        let f = FeatureFactor::from_density(&g, &ls(), FeatureMode::Complex, 0.0).unwrap();
        let lr = build_feature_matrix(&[0.0, 0.5, 1.0], &f, true).unwrap();
        assert!(matches!(
            kernel_matrix(&lr),
            Err(Error::NonRealKernel { .. })
        ));
    }

    #[test]
    fn oracle_origin_is_total_spectral_sum() {
        let g = FrequencyGrid::symmetric(9, 3.0).unwrap();
        let model = SpectralDensityModel::HarmonizableMixture(HarmonizableMixture::reference());
        let k = riemann_kernel_oracle_complex(&[0.0], &g, &model);
        let s = build_spectral_matrix(&g, &model);
        let total: Complex64 = s.matrix().iter().sum::<Complex64>() * g.delta_omega().powi(2);
        assert_relative_eq!(k[(0, 0)].re, total.re, max_relative = 1e-13);
    }

    #[test]
    fn oracle_diagonal_real_nonnegative() {
        let g = FrequencyGrid::symmetric(15, 20.0).unwrap();
        let model = SpectralDensityModel::HarmonizableMixture(HarmonizableMixture::reference());
        let xs = [-1.0, -0.2, 0.0, 0.9];
        let k = riemann_kernel_oracle_complex(&xs, &g, &model);
        for i in 0..xs.len() {
            assert!(k[(i, i)].im.abs() < 1e-10);
            assert!(k[(i, i)].re > -1e-10);
        }
    }

    #[test]
    fn relative_error_values() {
        let k = RealMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        assert_eq!(relative_error(&k, &k).unwrap(), 0.0);
        assert_relative_eq!(
            relative_error(&(&k * 2.0), &k).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert!(matches!(
            relative_error(&k, &RealMatrix::zeros(2, 2)),
            Err(Error::ZeroReference)
        ));
        assert!(relative_error(&k, &RealMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn naive_single_sample_on_diagonal() {
        let sampler = GridDensitySampler::new(&ls(), 8.0, 200).unwrap();
        let k = naive_mc_kernel(&[0.0, 0.8], &sampler, 1, 11);
        assert_relative_eq!(k[(0, 0)].re, sampler.total_mass(), max_relative = 1e-15);
        assert_eq!(k[(0, 0)].im, 0.0);
        assert_relative_eq!(k[(1, 1)].norm(), sampler.total_mass(), max_relative = 1e-12);
        assert!(k[(1, 1)].im.abs() > 0.0);
        // the total mass of the Silverman density is k(0, 0) = 1
        assert_relative_eq!(sampler.total_mass(), 1.0, max_relative = 1e-4);
    }

    #[test]
    fn psd_of_density_features() {
        let g = FrequencyGrid::nonnegative(25, 6.0).unwrap();
        let f = FeatureFactor::from_density(&g, &ls(), FeatureMode::RealHermitian, 0.0).unwrap();
        let xs: Vec<f64> = (0..40).map(|i| -2.0 + 0.1 * i as f64).collect();
        let k = kernel_matrix(&build_feature_matrix(&xs, &f, true).unwrap()).unwrap();
        assert!(min_symmetric_eigenvalue(&k) >= -1e-10 * real_trace(&k) / 40.0);
    }
}
