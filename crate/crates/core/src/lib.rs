//! Regular Fourier features for harmonizable Gaussian processes.
//!
//! A spectral density `s(ω, ω′)` on a regular frequency grid gives a spectral
//! matrix `S`; factoring `S Δω² = C C†` yields feature maps whose Gram
//! matrices are positive semi-definite by construction. The same factor
//! drives path simulation, and a network-parametrized factor supports kernel
//! learning with low-rank marginal-likelihood inference.

pub mod approximation;
pub mod error;
pub mod features;
pub mod io;
pub mod kernels;
pub mod learn;
pub mod linalg;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
pub use features::{
    build_feature_matrix, kernel_matrix, relative_error, riemann_kernel_oracle, FeatureFactor,
    FeatureMode, LowRankKernel,
};
pub use kernels::{gram, KernelParams};
pub use linalg::{Complex64, ComplexMatrix, HermitianPsd, RealMatrix};
pub use spectral::{FrequencyGrid, GridSpec, HarmonizableMixture, SpectralDensityModel};
