use nalgebra::DVector;
use proptest::prelude::*;

use rnff::kernels::{k_hmk, k_ls};
use rnff::linalg::{
    hermitian_psd_factor, woodbury_solve, Complex64, ComplexMatrix, HermitianPsd, RealMatrix,
};
use rnff::spectral::{eval_hmk, eval_ls, HarmonizableMixture};
use rnff::FrequencyGrid;

fn complex_matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), rows * cols).prop_map(move |v| {
        ComplexMatrix::from_iterator(
            rows,
            cols,
            v.into_iter().map(|(re, im)| Complex64::new(re, im)),
        )
    })
}

proptest! {
    #[test]
    fn psd_factor_reconstructs(a in (1usize..12, 1usize..12).prop_flat_map(|(n, r)| complex_matrix(n, r))) {
        let s = &a * a.adjoint();
        let l = hermitian_psd_factor(&HermitianPsd::new(s.clone()).unwrap(), 0.0).unwrap();
        let err = (&l * l.adjoint() - &s).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-10 * s.norm().max(1.0));
        prop_assert!(l.ncols() <= a.ncols().max(1));
    }

    #[test]
    fn ls_kernel_symmetries(a in 0.05..3.0f64, x in -5.0..5.0f64, y in -5.0..5.0f64) {
        prop_assert_eq!(k_ls(a, x, y), k_ls(a, y, x));
        prop_assert_eq!(k_ls(a, x, y), k_ls(a, -x, -y));
        prop_assert!(k_ls(a, x, y) <= (k_ls(a, x, x) * k_ls(a, y, y)).sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn ls_density_symmetries(a in 0.05..3.0f64, w in -10.0..10.0f64, v in -10.0..10.0f64) {
        let s = eval_ls(a, w, v);
        prop_assert!(s >= 0.0);
        prop_assert!((s - eval_ls(a, v, w)).abs() <= 1e-15 * s.max(1e-300));
        prop_assert!((s - eval_ls(a, -w, -v)).abs() <= 1e-15 * s.max(1e-300));
    }

    #[test]
    fn hmk_density_is_hermitian(w in -15.0..15.0f64, v in -15.0..15.0f64) {
        let h = HarmonizableMixture::reference();
        let s = eval_hmk(&h, w, v);
        let t = eval_hmk(&h, v, w).conj();
        prop_assert!((s - t).norm() <= 1e-14 * s.norm().max(1e-300));
    }

    #[test]
    fn hmk_kernel_is_real_and_symmetric(x in -3.0..3.0f64, y in -3.0..3.0f64) {
        let h = HarmonizableMixture::reference();
        let k = k_hmk(&h, x, y).unwrap();
        prop_assert!((k - k_hmk(&h, y, x).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn grid_spacing_and_bounds(m in 2usize..300, omega in 0.1..50.0f64, symmetric in any::<bool>()) {
        let grid = if symmetric {
            FrequencyGrid::symmetric(m, omega).unwrap()
        } else {
            FrequencyGrid::nonnegative(m, omega).unwrap()
        };
        let w = grid.frequencies();
        prop_assert_eq!(w.len(), m);
        for pair in w.windows(2) {
            prop_assert!((pair[1] - pair[0] - grid.delta_omega()).abs() <= 1e-12 * omega);
        }
        prop_assert!(w.iter().all(|v| v.abs() <= omega * (1.0 + 1e-12)));
        prop_assert!((grid.period() - 2.0 * std::f64::consts::PI / grid.delta_omega()).abs() <= 1e-12 * grid.period());
    }

    #[test]
    fn woodbury_residual_is_small(
        (l, z) in (5usize..40, 1usize..8).prop_flat_map(|(n, p)| (
            prop::collection::vec(-1.0..1.0f64, n * p).prop_map(move |v| RealMatrix::from_vec(n, p, v)),
            prop::collection::vec(-1.0..1.0f64, n).prop_map(DVector::from_vec),
        )),
        sigma2 in 1e-3..10.0f64,
    ) {
        let x = woodbury_solve(&l, sigma2, &z).unwrap();
        let residual = &l * (l.transpose() * &x) + &x * sigma2 - &z;
        prop_assert!(residual.norm() <= 1e-8 * z.norm().max(1.0));
    }
}
