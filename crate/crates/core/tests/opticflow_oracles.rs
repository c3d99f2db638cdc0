mod common;

use std::sync::Arc;

use common::*;
use nalgebra::DMatrix;
use uapod::fluidsim::{band_limited_scalar, FluidModel, Grid2D};
use uapod::hmm::{
    posterior_factorized, DegenerateGaussianPrior, IdentityObservation, LinearObservation,
    ObservationOperator, PosteriorOptions,
};
use uapod::krylov::{DenseSymmetric, IdentityOperator, LinearOperator};
use uapod::opticflow::{
    build_observation, covariance_frobenius_map, gradient_prior, pixel_error_map,
    BrightnessConstancy, GradientPriorSpec, ImagePair,
};

#[test]
fn observation_adjoint_is_consistent() {
    let g = Grid2D::square(16).unwrap();
    let mut r = rng(61);
    let op = BrightnessConstancy::from_image(&g, &gaussian_vec(&mut r, 256));
    let x = gaussian_vec(&mut r, 512);
    let y = gaussian_vec(&mut r, 256);
    let lhs: f64 = y.iter().zip(op.apply(&x)).map(|(a, b)| a * b).sum();
    let rhs: f64 = x.iter().zip(op.apply_adjoint(&y)).map(|(a, b)| a * b).sum();
    assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
}

#[test]
fn prior_energy_equals_forward_difference_norm() {
    let (side, lambda) = (8, 2.5);
    let g = Grid2D::square(side).unwrap();
    let prior = gradient_prior(GradientPriorSpec { weight: lambda }, &g).unwrap();
    let v = gaussian_vec(&mut rng(62), 2 * side * side);
    let qv = prior.precision.apply(&v).unwrap();
    let energy: f64 = v.iter().zip(&qv).map(|(a, b)| a * b).sum();
    let mut dnorm = 0.0;
    for row in 0..side {
        for col in 0..side {
            let s = row * side + col;
            let e = row * side + (col + 1) % side;
            let n = ((row + 1) % side) * side + col;
            for k in 0..2 {
                dnorm +=
                    (v[2 * e + k] - v[2 * s + k]).powi(2) + (v[2 * n + k] - v[2 * s + k]).powi(2);
            }
        }
    }
    assert!((energy - lambda * dnorm).abs() <= 1e-10 * energy);
}

#[test]
fn prior_is_positive_semidefinite() {
    let g = Grid2D::square(8).unwrap();
    let prior = gradient_prior(GradientPriorSpec { weight: 1.0 }, &g).unwrap();
    let dense = prior.precision.to_dense().unwrap();
    let min = dense.symmetric_eigenvalues().min();
    assert!(min >= -1e-10);
}

#[test]
fn linear_ramp_shift_is_reproduced_exactly() {
    let side = 16;
    let g = Grid2D::square(side).unwrap();
    let slope = 0.3;
    let frame_a: Vec<f64> = (0..g.pixels()).map(|s| slope * (s % side) as f64).collect();
    let frame_b: Vec<f64> = (0..g.pixels())
        .map(|s| slope * ((s % side) as f64 - 1.0))
        .collect();
    let obs = build_observation(&ImagePair::new(g, frame_a, frame_b).unwrap(), 1.0).unwrap();
    let unit: Vec<f64> = (0..g.pixels()).flat_map(|_| [1.0, 0.0]).collect();
    let hx = obs.obs_op.apply(&unit);
    // Away from the periodic seam of the ramp.
    for s in 0..g.pixels() {
        let col = s % side;
        if col != 0 && col != side - 1 {
            assert!((hx[s] - obs.data[s]).abs() < 1e-12);
        }
    }
}

#[test]
fn transported_pair_is_close_to_its_linearization() {
    let g = Grid2D::square(32).unwrap();
    let fm = FluidModel::new(g, 0.0, 1.0).unwrap();
    let image = band_limited_scalar(&g, 1.0, 2.0, 7);
    let x: Vec<f64> = (0..g.pixels()).flat_map(|_| [0.3, -0.2]).collect();
    let next = fm.scalar_transport(&image, &x).unwrap();
    let obs = build_observation(&ImagePair::new(g, image.clone(), next).unwrap(), 1.0).unwrap();
    let resid: Vec<f64> = obs
        .data
        .iter()
        .zip(obs.obs_op.apply(&x))
        .map(|(a, b)| a - b)
        .collect();
    // First-order terms: the linearization remainder and the bilinear smoothing.
    let rel = vec_norm(&resid) / vec_norm(&obs.data);
    assert!(rel < 0.25, "relative residual {rel}");
}

#[test]
fn half_identity_posterior_gives_constant_map() {
    let g = Grid2D::square(4).unwrap();
    let n = g.state_dim();
    let prior = DegenerateGaussianPrior::new(Arc::new(IdentityOperator { dim: n })).full_rank();
    let obs = LinearObservation::new(
        Arc::new(IdentityObservation { dim: n }),
        vec![0.0; n],
        1.0,
        vec![1.0; n],
    )
    .unwrap();
    let post = posterior_factorized(&prior, &[obs], &PosteriorOptions::default()).unwrap();
    let map = covariance_frobenius_map(&post, &g).unwrap();
    for v in map {
        assert!((v - 0.5_f64.sqrt()).abs() < 1e-10);
    }
}

#[test]
fn covariance_map_matches_dense_inverse() {
    let g = Grid2D::square(4).unwrap();
    let (n, s2, lambda) = (g.state_dim(), 0.05, 0.5);
    let image = band_limited_scalar(&g, 1.0, 2.0, 3);
    let op = BrightnessConstancy::from_image(&g, &image);
    let y = gaussian_vec(&mut rng(63), g.pixels());
    let prior = gradient_prior(GradientPriorSpec { weight: lambda }, &g).unwrap();
    let obs = LinearObservation::new(Arc::new(op.clone()), vec![0.0; g.pixels()], s2, y).unwrap();
    let opts = PosteriorOptions {
        cg_tol: 1e-12,
        max_iter: Some(1000),
    };
    let post = posterior_factorized(&prior, &[obs], &opts).unwrap();
    let map = covariance_frobenius_map(&post, &g).unwrap();

    let h = DMatrix::from_fn(g.pixels(), n, |i, j| {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        op.apply(&e)[i]
    });
    let q = prior.precision.to_dense().unwrap();
    let k = h.transpose() * &h + q * s2 + DMatrix::identity(n, n) * post.regularization;
    let cov = k.try_inverse().unwrap() * s2;
    for s in 0..g.pixels() {
        let block = cov.view((2 * s, 2 * s), (2, 2));
        assert!((block.norm() - map[s]).abs() <= 1e-6 * block.norm().max(1.0));
        // Row versus column extraction of the same block.
        assert!((cov[(2 * s, 2 * s + 1)] - cov[(2 * s + 1, 2 * s)]).abs() <= 1e-6);
    }
    let _ = DenseSymmetric::new(cov).unwrap();
}

#[test]
fn error_map_matches_naive_loop() {
    let g = Grid2D::square(8).unwrap();
    let mut r = rng(64);
    let truth = gaussian_vec(&mut r, g.state_dim());
    let mean = gaussian_vec(&mut r, g.state_dim());
    let map = pixel_error_map(&truth, &mean, &g).unwrap();
    for s in 0..g.pixels() {
        let (du, dv) = (
            truth[2 * s] - mean[2 * s],
            truth[2 * s + 1] - mean[2 * s + 1],
        );
        let want = (du * du + dv * dv) / (truth[2 * s].powi(2) + truth[2 * s + 1].powi(2));
        assert!(rel_err(map[s], want) < 1e-14);
    }
    assert!(pixel_error_map(&truth, &truth, &g)
        .unwrap()
        .iter()
        .all(|v| *v == 0.0));
    let zero = vec![0.0; g.state_dim()];
    assert!(pixel_error_map(&truth, &zero, &g)
        .unwrap()
        .iter()
        .all(|v| (v - 1.0).abs() < 1e-15));
}

#[test]
fn constant_image_returns_prior_with_shift() {
    let g = Grid2D::square(8).unwrap();
    let pair = ImagePair::new(g, vec![1.0; 64], vec![1.5; 64]).unwrap();
    let obs = build_observation(&pair, 0.1).unwrap();
    let prior = gradient_prior(GradientPriorSpec { weight: 1.0 }, &g).unwrap();
    let post = posterior_factorized(&prior, &[obs], &PosteriorOptions::default()).unwrap();
    assert!(post.mean.iter().all(|v| *v == 0.0));
    assert!(post.regularization > 0.0);
}
