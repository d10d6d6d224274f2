//! Frequency grids and spectral density models.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::ModelParams;
use crate::linalg::{Complex64, ComplexMatrix, HermitianPsd};

/// Equispaced frequency grid.
///
/// The nonnegative grid is `{0, Δω, …, (m−1)Δω}` with `Δω = ω_max / m`.
/// The symmetric grid is `{(k − (m−1)/2)·Δω}` with `Δω = 2ω_max / (m − 1)`;
/// it contains the origin for odd `m` and is offset by `Δω/2` for even `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omega_max: f64,
    delta_omega: f64,
    symmetric: bool,
    frequencies: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub m: usize,
    pub omega_max: f64,
    pub symmetric: bool,
}

impl FrequencyGrid {
    pub fn nonnegative(m: usize, omega_max: f64) -> Result<Self> {
        check_cutoff(omega_max)?;
        if m == 0 {
            return Err(Error::invalid("grid needs at least one frequency"));
        }
        let delta_omega = omega_max / m as f64;
        let frequencies = (0..m).map(|k| k as f64 * delta_omega).collect();
        Ok(Self {
            omega_max,
            delta_omega,
            symmetric: false,
            frequencies,
        })
    }

    pub fn symmetric(m: usize, omega_max: f64) -> Result<Self> {
        check_cutoff(omega_max)?;
        if m < 2 {
            return Err(Error::invalid(
                "symmetric grid needs at least two frequencies",
            ));
        }
        let delta_omega = 2.0 * omega_max / (m - 1) as f64;
        let center = (m - 1) as f64 / 2.0;
        let frequencies = (0..m).map(|k| (k as f64 - center) * delta_omega).collect();
        Ok(Self {
            omega_max,
            delta_omega,
            symmetric: true,
            frequencies,
        })
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        if spec.symmetric {
            Self::symmetric(spec.m, spec.omega_max)
        } else {
            Self::nonnegative(spec.m, spec.omega_max)
        }
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            m: self.m(),
            omega_max: self.omega_max,
            symmetric: self.symmetric,
        }
    }

    pub fn m(&self) -> usize {
        self.frequencies.len()
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn delta_omega(&self) -> f64 {
        self.delta_omega
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Period `T = 2π/Δω` of the discretized representation.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.delta_omega
    }

    /// Largest `|x|` for which the approximation is free of period overlap.
    pub fn aliasing_bound(&self) -> f64 {
        PI / self.delta_omega
    }

    pub fn zero_index(&self) -> Option<usize> {
        if !self.symmetric {
            return Some(0);
        }
        let m = self.m();
        (m % 2 == 1).then_some((m - 1) / 2)
    }

    /// Index of `−ω_k`, available on symmetric grids.
    pub fn negated_index(&self, k: usize) -> Option<usize> {
        (self.symmetric && k < self.m()).then(|| self.m() - 1 - k)
    }

    /// The nonnegative grid mirrored onto `{−(m−1)Δω, …, (m−1)Δω}`; symmetric
    /// grids are returned unchanged.
    pub fn mirrored(&self) -> Vec<f64> {
        if self.symmetric {
            return self.frequencies.clone();
        }
        let m = self.m() as isize;
        (-(m - 1)..m).map(|k| k as f64 * self.delta_omega).collect()
    }
}

fn check_cutoff(omega_max: f64) -> Result<()> {
    if !(omega_max > 0.0) || !omega_max.is_finite() {
        return Err(Error::invalid(format!(
            "cutoff frequency must be positive, got {omega_max}"
        )));
    }
    Ok(())
}

/// `true` iff `x_max < π/Δω`.
pub fn validate_aliasing(grid: &FrequencyGrid, x_max: f64) -> bool {
    x_max < grid.aliasing_bound()
}

/// Locally stationary (Silverman) spectral density
/// `s(ω, ω′) = exp(−ω̄²/2a) · exp(−ω̃²/8a) / (4πa)` with midpoint `ω̄` and lag `ω̃`.
pub fn eval_ls(a: f64, omega: f64, omega_prime: f64) -> f64 {
    let mid = 0.5 * (omega + omega_prime);
    let lag = omega - omega_prime;
    (-mid * mid / (2.0 * a)).exp() * (-lag * lag / (8.0 * a)).exp() / (4.0 * PI * a)
}

/// Single-component harmonizable mixture: Silverman densities shifted by
/// `(η_i, η_j)` and weighted by a Hermitian PSD amplitude matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonizableMixture {
    a: f64,
    etas: Vec<f64>,
    amplitude: HermitianPsd,
}

impl HarmonizableMixture {
    pub fn new(a: f64, etas: Vec<f64>, amplitude: ComplexMatrix) -> Result<Self> {
        check_a(a)?;
        if amplitude.nrows() != etas.len() {
            return Err(Error::dim(format!(
                "amplitude is {}x{} but {} frequencies were given",
                amplitude.nrows(),
                amplitude.ncols(),
                etas.len()
            )));
        }
        let amplitude = HermitianPsd::new(amplitude)?;
        let tol = 1e-10 * amplitude.trace().abs().max(f64::MIN_POSITIVE);
        let min_eig = amplitude.min_eigenvalue();
        if min_eig < -tol {
            return Err(Error::IndefiniteInput {
                min_eigenvalue: min_eig,
                tolerance: tol,
            });
        }
        Ok(Self { a, etas, amplitude })
    }

    /// `η = ±2π`, `B = [[2, i/2], [−i/2, 2]]`, `a = 1`.
    pub fn reference() -> Self {
        let i = Complex64::new(0.0, 1.0);
        let b = ComplexMatrix::from_row_slice(2, 2, &[2.0.into(), 0.5 * i, -0.5 * i, 2.0.into()]);
        Self::new(1.0, vec![2.0 * PI, -2.0 * PI], b).expect("reference mixture is valid")
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn amplitude(&self) -> &ComplexMatrix {
        self.amplitude.matrix()
    }

    pub fn eval(&self, omega: f64, omega_prime: f64) -> Complex64 {
        let b = self.amplitude.matrix();
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, eta_i) in self.etas.iter().enumerate() {
            for (j, eta_j) in self.etas.iter().enumerate() {
                acc += b[(i, j)] * eval_ls(self.a, omega - eta_i, omega_prime - eta_j);
            }
        }
        acc
    }
}

pub fn eval_hmk(params: &HarmonizableMixture, omega: f64, omega_prime: f64) -> Complex64 {
    params.eval(omega, omega_prime)
}

fn check_a(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::invalid(format!(
            "kernel parameter a must be positive, got {a}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub enum SpectralDensityModel {
    LocallyStationary { a: f64 },
    HarmonizableMixture(HarmonizableMixture),
    LearnedFactorized(Box<ModelParams>),
}

impl SpectralDensityModel {
    pub fn locally_stationary(a: f64) -> Result<Self> {
        check_a(a)?;
        Ok(Self::LocallyStationary { a })
    }

    pub fn eval(&self, omega: f64, omega_prime: f64) -> Complex64 {
        match self {
            Self::LocallyStationary { a } => eval_ls(*a, omega, omega_prime).into(),
            Self::HarmonizableMixture(hmk) => hmk.eval(omega, omega_prime),
            Self::LearnedFactorized(params) => params.spectral_density(omega, omega_prime),
        }
    }

    /// Whether the spectral weights are real, i.e. `s(ω, ω′) = s(ω, −ω′)` and
    /// `s` is real-valued.
    pub fn has_real_weights(&self) -> bool {
        matches!(self, Self::LocallyStationary { .. })
    }
}

/// `[S]_ij = s(ω_i, ω_j)`, symmetrized to be exactly Hermitian. Not scaled by `Δω²`.
pub fn build_spectral_matrix(grid: &FrequencyGrid, model: &SpectralDensityModel) -> HermitianPsd {
    let w = grid.frequencies();
    let s = ComplexMatrix::from_fn(w.len(), w.len(), |i, j| model.eval(w[i], w[j]));
    HermitianPsd::symmetrized(s)
}

/// `[P]_ij = s(ω_i, −ω_j)`: pseudo-covariance of the spectral weights of a
/// real process, whose weights satisfy `W(−ω) = conj(W(ω))`.
pub fn build_pseudo_matrix(grid: &FrequencyGrid, model: &SpectralDensityModel) -> ComplexMatrix {
    let w = grid.frequencies();
    let p = ComplexMatrix::from_fn(w.len(), w.len(), |i, j| model.eval(w[i], -w[j]));
    // P is complex symmetric by the real-process symmetry of s
    (&p + p.transpose()) * Complex64::new(0.5, 0.0)
}

/// JSON form of a closed-form spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub model: String,
    pub a: f64,
    #[serde(default)]
    pub etas: Vec<f64>,
    #[serde(rename = "B_re", default)]
    pub b_re: Vec<Vec<f64>>,
    #[serde(rename = "B_im", default)]
    pub b_im: Vec<Vec<f64>>,
}

impl SpectralConfig {
    pub fn from_model(model: &SpectralDensityModel) -> Result<Self> {
        match model {
            SpectralDensityModel::LocallyStationary { a } => Ok(Self {
                model: "ls".into(),
                a: *a,
                etas: vec![],
                b_re: vec![],
                b_im: vec![],
            }),
            SpectralDensityModel::HarmonizableMixture(h) => {
                let b = h.amplitude();
                let rows = |f: fn(&Complex64) -> f64| {
                    (0..b.nrows())
                        .map(|i| (0..b.ncols()).map(|j| f(&b[(i, j)])).collect())
                        .collect()
                };
                Ok(Self {
                    model: "hmk".into(),
                    a: h.a(),
                    etas: h.etas().to_vec(),
                    b_re: rows(|z| z.re),
                    b_im: rows(|z| z.im),
                })
            }
            SpectralDensityModel::LearnedFactorized(_) => Err(Error::invalid(
                "learned densities serialize through the model document",
            )),
        }
    }

    pub fn to_model(&self) -> Result<SpectralDensityModel> {
        match self.model.as_str() {
            "ls" => SpectralDensityModel::locally_stationary(self.a),
            "hmk" => {
                let q = self.etas.len();
                let shape_ok =
                    |b: &Vec<Vec<f64>>| b.len() == q && b.iter().all(|row| row.len() == q);
                if !shape_ok(&self.b_re) || !shape_ok(&self.b_im) {
                    return Err(Error::dim(format!("B_re and B_im must be {q}x{q}")));
                }
                let b = ComplexMatrix::from_fn(q, q, |i, j| {
                    Complex64::new(self.b_re[i][j], self.b_im[i][j])
                });
                Ok(SpectralDensityModel::HarmonizableMixture(
                    HarmonizableMixture::new(self.a, self.etas.clone(), b)?,
                ))
            }
            other => Err(Error::Parse(format!(
                "unknown spectral model {other:?}, expected \"ls\" or \"hmk\""
            ))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
