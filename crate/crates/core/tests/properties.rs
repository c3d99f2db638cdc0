mod common;

use proptest::prelude::*;
use uapod::cli::{decode_field, encode_field, FieldDims};
use uapod::fluidsim::{band_limited_velocity, FluidModel, Grid2D};
use uapod::krylov::{dense_eig_oracle, lanczos_topk, DenseSymmetric};
use uapod::opticflow::spearman;
use uapod::pod::{reconstruction_error, snapshot_basis, StateTrajectory};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn field_dump_round_trips_bitwise(w in 1usize..6, h in 1usize..6, c in 1usize..3, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let mut values = common::gaussian_vec(&mut r, w * h * c);
        if let Some(v) = values.first_mut() {
            *v = f64::from_bits(seed | 1); // arbitrary bit pattern, possibly NaN
        }
        let dims = FieldDims::new(w, h, c);
        let bytes = encode_field(&values, dims).unwrap();
        prop_assert_eq!(bytes.len(), 28 + 8 * w * h * c);
        let (d2, back) = decode_field(&bytes).unwrap();
        prop_assert_eq!(d2, dims);
        prop_assert!(values.iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn lanczos_agrees_with_dense_on_gapped_spectra(seed in 0u64..1000, n in 20usize..60) {
        let mut r = common::rng(seed);
        let mut spectrum: Vec<f64> = (0..n).map(|i| 0.5 / (1.0 + i as f64)).collect();
        for (j, s) in spectrum.iter_mut().take(4).enumerate() {
            *s = 10.0 - 2.0 * j as f64;
        }
        let a = common::psd_with_spectrum(&mut r, &spectrum);
        let dec = lanczos_topk(&DenseSymmetric::new(a.clone()).unwrap(), 4, 16, seed, 1e-12).unwrap();
        let oracle = dense_eig_oracle(&a).unwrap();
        for j in 0..4 {
            prop_assert!(common::rel_err(dec.eigenvalues[j], oracle.eigenvalues[j]) < 1e-8);
        }
        let pd = common::projector(&oracle.eigenvectors.columns(0, 4).into_owned());
        prop_assert!((common::projector(&dec.eigenvectors) - pd).norm() < 1e-6);
    }

    #[test]
    fn velocities_stay_divergence_free_and_dissipative(seed in any::<u64>(), alpha in 0.05f64..0.2) {
        let fm = FluidModel::new(Grid2D::square(16).unwrap(), alpha, 1.0).unwrap();
        let x = band_limited_velocity(fm.grid(), 1.0, 3.0, 0.4, seed);
        let next = fm.step(&x, &vec![0.0; x.len()]).unwrap();
        prop_assert!(common::vec_norm(&fm.divergence(&next)) <= 1e-8 * common::vec_norm(&next));
        prop_assert!(common::vec_norm(&next) <= common::vec_norm(&x) * (1.0 + 1e-10));
    }

    #[test]
    fn snapshot_errors_are_monotone(seed in any::<u64>(), steps in 2usize..8) {
        let mut r = common::rng(seed);
        let traj = StateTrajectory::new((0..steps).map(|_| common::gaussian_vec(&mut r, 12)).collect()).unwrap();
        let basis = snapshot_basis(&traj, steps).unwrap();
        let mut last = 1.0;
        for k in 1..=basis.k() {
            let e = reconstruction_error(&traj, &basis.truncate(k)).unwrap();
            prop_assert!(e <= last + 1e-12);
            last = e;
        }
        prop_assert!(last < 1e-10);
    }

    #[test]
    fn spearman_is_bounded_and_symmetric(seed in any::<u64>(), len in 3usize..40) {
        let mut r = common::rng(seed);
        let a = common::gaussian_vec(&mut r, len);
        let b = common::gaussian_vec(&mut r, len);
        let rho = spearman(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&rho));
        prop_assert!((rho - spearman(&b, &a).unwrap()).abs() < 1e-15);
        prop_assert!((spearman(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }
}
