//! Kernel approximation runs against a closed-form reference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    build_feature_matrix, kernel_matrix, max_abs_error, relative_error, FeatureFactor, FeatureMode,
};
use crate::kernels::{gram, KernelParams};
use crate::linalg::RealMatrix;
use crate::spectral::{validate_aliasing, FrequencyGrid, SpectralDensityModel};

/// Equispaced inputs `x_i = iΔx`, for `i = 0 … n−1` or, when centered,
/// `i = −(n−1)/2 … (n−1)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationSpec {
    pub n: usize,
    pub dx: f64,
    pub centered: bool,
}

impl LocationSpec {
    pub fn locations(&self) -> Vec<f64> {
        let offset = if self.centered {
            (self.n as f64 - 1.0) / 2.0
        } else {
            0.0
        };
        (0..self.n).map(|i| (i as f64 - offset) * self.dx).collect()
    }
}

/// Closed-form kernel whose spectral density is `model`.
pub fn oracle_kernel(model: &SpectralDensityModel) -> Result<KernelParams> {
    match model {
        SpectralDensityModel::LocallyStationary { a } => KernelParams::locally_stationary(*a),
        SpectralDensityModel::HarmonizableMixture(h) => {
            Ok(KernelParams::HarmonizableMixture(h.clone()))
        }
        SpectralDensityModel::LearnedFactorized(_) => Err(Error::invalid(
            "learned densities have no closed-form kernel",
        )),
    }
}

/// Complex on a symmetric grid; cosine for real weights on a nonnegative grid,
/// real-hermitian otherwise.
pub fn default_mode(model: &SpectralDensityModel, grid: &FrequencyGrid) -> FeatureMode {
    if grid.is_symmetric() {
        FeatureMode::Complex
    } else if model.has_real_weights() {
        FeatureMode::RealCosine
    } else {
        FeatureMode::RealHermitian
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationSummary {
    pub max_abs_error: f64,
    pub rel_rsse: f64,
    pub m: usize,
    pub omega_max: f64,
    pub delta_omega: f64,
    pub aliasing_ok: bool,
}

impl ApproximationSummary {
    pub fn compute(
        grid: &FrequencyGrid,
        xs: &[f64],
        exact: &RealMatrix,
        lowrank: &RealMatrix,
    ) -> Result<Self> {
        let x_max = xs.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        Ok(Self {
            max_abs_error: max_abs_error(lowrank, exact)?,
            rel_rsse: relative_error(lowrank, exact)?,
            m: grid.m(),
            omega_max: grid.omega_max(),
            delta_omega: grid.delta_omega(),
            aliasing_ok: validate_aliasing(grid, x_max),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Approximation {
    pub xs: Vec<f64>,
    pub exact: RealMatrix,
    pub lowrank: RealMatrix,
    pub summary: ApproximationSummary,
}

impl Approximation {
    pub fn abs_error(&self) -> RealMatrix {
        (&self.lowrank - &self.exact).abs()
    }
}

#[derive(Debug, Clone)]
pub struct ApproximationSetup {
    pub model: SpectralDensityModel,
    pub grid: FrequencyGrid,
    pub mode: FeatureMode,
    pub jitter: f64,
    pub strict: bool,
}

impl ApproximationSetup {
    pub fn new(model: SpectralDensityModel, grid: FrequencyGrid) -> Self {
        let mode = default_mode(&model, &grid);
        Self {
            model,
            grid,
            mode,
            jitter: 0.0,
            strict: false,
        }
    }

    pub fn lowrank(&self, xs: &[f64]) -> Result<RealMatrix> {
        let factor = FeatureFactor::from_density(&self.grid, &self.model, self.mode, self.jitter)?;
        kernel_matrix(&build_feature_matrix(xs, &factor, self.strict)?)
    }

    pub fn run(&self, xs: &[f64]) -> Result<Approximation> {
        let lowrank = self.lowrank(xs)?;
        let exact = gram(&oracle_kernel(&self.model)?, xs)?;
        let summary = ApproximationSummary::compute(&self.grid, xs, &exact, &lowrank)?;
        Ok(Approximation {
            xs: xs.to_vec(),
            exact,
            lowrank,
            summary,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    M,
    OmegaMax,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            Self::M => "m",
            Self::OmegaMax => "omega_max",
        }
    }
}

impl std::str::FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m" => Ok(Self::M),
            "omega_max" | "omega-max" => Ok(Self::OmegaMax),
            other => Err(Error::Parse(format!("unknown sweep variable {other:?}"))),
        }
    }
}

/// One ablation cell: relative RSSE with the swept quantity set to `value`
/// and the other fixed at `fixed`.
pub fn ablation_point(
    model: &SpectralDensityModel,
    sweep: SweepVar,
    value: f64,
    fixed: f64,
    symmetric: bool,
    locations: &LocationSpec,
) -> Result<f64> {
    let (m, omega_max) = match sweep {
        SweepVar::M => (value, fixed),
        SweepVar::OmegaMax => (fixed, value),
    };
    if m.fract() != 0.0 || m < 1.0 {
        return Err(Error::invalid(format!(
            "feature count must be a positive integer, got {m}"
        )));
    }
    let grid = if symmetric {
        FrequencyGrid::symmetric(m as usize, omega_max)?
    } else {
        FrequencyGrid::nonnegative(m as usize, omega_max)?
    };
    let xs = locations.locations();
    let setup = ApproximationSetup::new(model.clone(), grid);
    let lowrank = setup.lowrank(&xs)?;
    let exact = gram(&oracle_kernel(model)?, &xs)?;
    relative_error(&lowrank, &exact)
}
