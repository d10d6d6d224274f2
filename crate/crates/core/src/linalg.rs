//! Dense linear algebra used throughout the crate.
//!
//! Two families of routines live here: eigendecomposition-based square roots
//! of Hermitian positive semi-definite matrices, and low-rank solves and
//! log-determinants for matrices of the form `L Lᵀ + σ² I`, which only ever
//! touch the small `p × p` inner system.

use nalgebra::{Cholesky, ComplexField, DMatrix, DVector, Dyn, SymmetricEigen};

pub use nalgebra::Complex;

use crate::error::{Error, Result};

pub type Complex64 = Complex<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;
pub type RealMatrix = DMatrix<f64>;

/// Relative symmetry defect above which input is rejected as non-Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenpairs with `λ < RANK_TOL · λ_max` are dropped from factors.
pub const RANK_TOL: f64 = 1e-12;
/// Most negative eigenvalue (relative to `trace / dim`) still accepted as PSD.
pub const INDEFINITE_TOL: f64 = 1e-6;
/// Condition number of the inner low-rank system above which it is singular.
pub const MAX_INNER_CONDITION: f64 = 1e14;

/// A Hermitian matrix, symmetrized on construction.
///
/// Positive semi-definiteness is not verified here; [`hermitian_psd_factor`]
/// checks it against [`INDEFINITE_TOL`] when the square root is taken.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianPsd {
    entries: ComplexMatrix,
}

impl HermitianPsd {
    /// Rejects input whose relative Hermitian defect exceeds [`HERMITIAN_TOL`],
    /// then replaces it by `(S + S†) / 2`.
    pub fn new(s: ComplexMatrix) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::dim(format!(
                "{}x{} matrix is not square",
                s.nrows(),
                s.ncols()
            )));
        }
        let norm = s.norm();
        let adjoint = s.adjoint();
        let defect = if norm > 0.0 {
            (&s - &adjoint).norm() / norm
        } else {
            0.0
        };
        if defect > HERMITIAN_TOL {
            return Err(Error::NonHermitianInput { defect });
        }
        Ok(Self::symmetrized(s))
    }

    /// Symmetrizes without checking the defect.
    pub fn symmetrized(s: ComplexMatrix) -> Self {
        let adjoint = s.adjoint();
        let mut entries = (s + adjoint) * Complex64::new(0.5, 0.0);
        // diagonal of (S + S†)/2 is already real up to rounding
        for i in 0..entries.nrows() {
            entries[(i, i)].im = 0.0;
        }
        Self { entries }
    }

    pub fn from_real(s: &RealMatrix) -> Result<Self> {
        Self::new(s.map(|v| Complex64::new(v, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.entries
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).sum()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        values.sort_by(|a, b| a.total_cmp(b));
        values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: &self.entries * Complex64::new(factor, 0.0),
        }
    }
}

/// Square root `C` of `S + jitter·I` with `C C† ≈ S + jitter·I`.
///
/// Eigenvalues are clipped at zero and eigenpairs below `RANK_TOL · λ_max`
/// are dropped, so `C` is `dim × p` with `p ≤ dim`. Columns are ordered by
/// descending eigenvalue and each eigenvector is rotated so that its largest
/// entry (first one on ties) is real and positive.
pub fn hermitian_psd_factor(s: &HermitianPsd, jitter: f64) -> Result<ComplexMatrix> {
    psd_factor(s.matrix(), jitter)
}

/// Real symmetric counterpart of [`hermitian_psd_factor`].
pub fn symmetric_psd_factor(s: &RealMatrix, jitter: f64) -> Result<RealMatrix> {
    if !s.is_square() {
        return Err(Error::dim("matrix is not square"));
    }
    let norm = s.norm();
    let defect = if norm > 0.0 {
        (s - s.transpose()).norm() / norm
    } else {
        0.0
    };
    if defect > HERMITIAN_TOL {
        return Err(Error::NonHermitianInput { defect });
    }
    let sym = (s + s.transpose()) * 0.5;
    psd_factor(&sym, jitter)
}

fn psd_factor<T>(s: &DMatrix<T>, jitter: f64) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    if !(jitter >= 0.0) {
        return Err(Error::invalid(format!(
            "jitter must be nonnegative, got {jitter}"
        )));
    }
    let dim = s.nrows();
    if dim == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let mut a = s.clone();
    for i in 0..dim {
        a[(i, i)] += T::from_real(jitter);
    }
    let trace: f64 = (0..dim).map(|i| a[(i, i)].real()).sum();
    let eig = SymmetricEigen::new(a);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .total_cmp(&eig.eigenvalues[i])
            .then(i.cmp(&j))
    });

    let lambda_max = eig.eigenvalues[order[0]];
    let lambda_min = eig.eigenvalues[order[dim - 1]];
    let tolerance = INDEFINITE_TOL * (trace / dim as f64).abs();
    if lambda_min < -tolerance {
        return Err(Error::IndefiniteInput {
            min_eigenvalue: lambda_min,
            tolerance,
        });
    }
    if lambda_max <= 0.0 {
        return Ok(DMatrix::zeros(dim, 0));
    }

    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&k| eig.eigenvalues[k] >= RANK_TOL * lambda_max)
        .collect();
    let mut c = DMatrix::<T>::zeros(dim, kept.len());
    for (col, &k) in kept.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let pivot = largest_entry(v.iter().copied());
        let phase = v[pivot].signum().conjugate();
        let scale = T::from_real(eig.eigenvalues[k].sqrt());
        for row in 0..dim {
            c[(row, col)] = v[row] * phase * scale;
        }
    }
    Ok(c)
}

fn largest_entry<T: ComplexField<RealField = f64>>(values: impl Iterator<Item = T>) -> usize {
    let mut best = 0;
    let mut best_mod = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        let m = v.modulus();
        // strict comparison with a relative margin keeps the first of near-ties
        if m > best_mod * (1.0 + 1e-9) || best_mod == f64::NEG_INFINITY {
            best = i;
            best_mod = m;
        }
    }
    best
}

/// `Σ = L Lᵀ + σ² I` represented through its `p × p` inner system
/// `A = Lᵀ L + σ² I`; the `n × n` matrix is never formed.
#[derive(Debug, Clone)]
pub struct LowRankSystem {
    l: RealMatrix,
    sigma2: f64,
    inner: Cholesky<f64, Dyn>,
}

impl LowRankSystem {
    pub fn new(l: &RealMatrix, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::invalid(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        let p = l.ncols();
        let mut a = l.tr_mul(l);
        for i in 0..p {
            a[(i, i)] += sigma2;
        }
        let condition = if p == 0 {
            1.0
        } else {
            let eig = a.clone().symmetric_eigenvalues();
            let max = eig.max();
            let min = eig.min();
            if min > 0.0 {
                max / min
            } else {
                f64::INFINITY
            }
        };
        if !(condition <= MAX_INNER_CONDITION) {
            return Err(Error::SingularInnerSystem { condition });
        }
        let inner = Cholesky::new(a).ok_or(Error::SingularInnerSystem { condition })?;
        Ok(Self {
            l: l.clone(),
            sigma2,
            inner,
        })
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    pub fn rank(&self) -> usize {
        self.l.ncols()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn factor(&self) -> &RealMatrix {
        &self.l
    }

    /// `Σ⁻¹ z = (z − L A⁻¹ Lᵀ z) / σ²`.
    pub fn solve(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.n() {
            return Err(Error::dim(format!(
                "rhs has length {}, expected {}",
                z.len(),
                self.n()
            )));
        }
        let inner_rhs = self.l.tr_mul(z);
        let inner_sol = self.inner.solve(&inner_rhs);
        Ok((z - &self.l * inner_sol) / self.sigma2)
    }

    /// `log det Σ = (n − p) log σ² + log det A`.
    pub fn logdet(&self) -> f64 {
        let n = self.n() as f64;
        let p = self.rank() as f64;
        let inner: f64 = self
            .inner
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| 2.0 * d.ln())
            .sum();
        (n - p) * self.sigma2.ln() + inner
    }

    /// `A⁻¹` for the inner system.
    pub fn inner_inverse(&self) -> RealMatrix {
        self.inner.inverse()
    }

    /// Solves `A x = b` against the inner system.
    pub fn solve_inner(&self, b: &DVector<f64>) -> DVector<f64> {
        self.inner.solve(b)
    }
}

/// `(L Lᵀ + σ² I)⁻¹ z` in `O(n p²)`.
pub fn woodbury_solve(l: &RealMatrix, sigma2: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
    LowRankSystem::new(l, sigma2)?.solve(z)
}

/// `log det(L Lᵀ + σ² I)` via the matrix determinant lemma.
pub fn lowrank_logdet(l: &RealMatrix, sigma2: f64) -> Result<f64> {
    Ok(LowRankSystem::new(l, sigma2)?.logdet())
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_symmetric_eigenvalue(k: &RealMatrix) -> f64 {
    if k.nrows() == 0 {
        return 0.0;
    }
    let sym = (k + k.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

pub fn real_trace(k: &RealMatrix) -> f64 {
    k.diagonal().sum()
}
