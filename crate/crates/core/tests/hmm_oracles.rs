mod common;

use std::sync::Arc;

use common::*;
use nalgebra::{DMatrix, DVector};
use uapod::hmm::{
    covariance_column, kalman_rts_oracle, posterior_factorized, Covariance,
    DegenerateGaussianPrior, DenseLgss, DenseObservation, GaussianPosterior, LinearObservation,
    PosteriorOptions,
};
use uapod::krylov::{DenseSymmetric, LinearOperator};

fn tight() -> PosteriorOptions {
    PosteriorOptions {
        cg_tol: 1e-13,
        max_iter: Some(2000),
    }
}

fn dense_cov(post: &GaussianPosterior) -> DMatrix<f64> {
    post.covariance.to_dense().unwrap()
}

fn observation(h: &DMatrix<f64>, xi: Vec<f64>, sigma2: f64, y: Vec<f64>) -> LinearObservation {
    LinearObservation::new(Arc::new(DenseObservation::new(h.clone())), xi, sigma2, y).unwrap()
}

fn full_rank_prior(q: &DMatrix<f64>) -> DegenerateGaussianPrior {
    DegenerateGaussianPrior::new(Arc::new(DenseSymmetric::new(q.clone()).unwrap())).full_rank()
}

#[test]
fn matches_dense_inverse_oracle() {
    let mut r = rng(21);
    let (n, m, s2) = (40, 30, 0.7);
    let q = random_spd(&mut r, n, 0.2);
    let h = gaussian_matrix(&mut r, m, n);
    let y = gaussian_vec(&mut r, m);
    let xi = gaussian_vec(&mut r, m);
    let post = posterior_factorized(
        &full_rank_prior(&q),
        &[observation(&h, xi.clone(), s2, y.clone())],
        &tight(),
    )
    .unwrap();

    let k = h.transpose() * &h + &q * s2;
    let kinv = k.cholesky().unwrap().inverse();
    let resid = DVector::from_vec(y) - DVector::from_vec(xi);
    let mean = &kinv * (h.transpose() * resid);
    let cov = &kinv * s2;
    assert!((DVector::from_vec(post.mean.clone()) - &mean).norm() <= 1e-8 * mean.norm());
    assert!((dense_cov(&post) - &cov).norm() <= 1e-8 * cov.norm());
    assert_eq!(post.regularization, 0.0);
}

/// Posterior of `x ~ N(0, q^-1)` given `y = H x + xi + w` by direct Gaussian
/// conditioning in observation space.
fn condition(
    q: &DMatrix<f64>,
    h: &DMatrix<f64>,
    xi: &[f64],
    s2: f64,
    y: &[f64],
) -> (DVector<f64>, DMatrix<f64>) {
    let p0 = q.clone().cholesky().unwrap().inverse();
    let m = h.nrows();
    let innov = h * &p0 * h.transpose() + DMatrix::identity(m, m) * s2;
    let gain = &p0 * h.transpose() * innov.cholesky().unwrap().inverse();
    let resid = DVector::from_column_slice(y) - DVector::from_column_slice(xi);
    let mean = &gain * resid;
    let cov = &p0 - &gain * h * &p0;
    (mean, (&cov + cov.transpose()) * 0.5)
}

#[test]
fn matches_brute_force_conditioning_on_twenty_instances() {
    for seed in 0..20u64 {
        let mut r = rng(100 + seed);
        let n = 8 + (seed as usize * 3) % 56;
        let m = 4 + (seed as usize * 7) % n;
        let s2 = 0.1 + 0.1 * seed as f64;
        let q = random_spd(&mut r, n, 0.3);
        let h = gaussian_matrix(&mut r, m, n);
        let xi = gaussian_vec(&mut r, m);
        let y = gaussian_vec(&mut r, m);
        let post = posterior_factorized(
            &full_rank_prior(&q),
            &[observation(&h, xi.clone(), s2, y.clone())],
            &tight(),
        )
        .unwrap();
        let (mean, cov) = condition(&q, &h, &xi, s2, &y);
        let dm = (DVector::from_vec(post.mean.clone()) - &mean).norm() / mean.norm();
        let dc = (dense_cov(&post) - &cov).norm() / cov.norm();
        assert!(
            dm < 1e-8 && dc < 1e-8,
            "seed {seed}: mean {dm:e} cov {dc:e}"
        );
    }
}

#[test]
fn replicas_shrink_covariance_monotonically() {
    let mut r = rng(22);
    let (n, m) = (12, 6);
    let q = random_spd(&mut r, n, 0.5);
    let h = gaussian_matrix(&mut r, m, n);
    let x = gaussian_vec(&mut r, n);
    let y: Vec<f64> = (&h * DVector::from_vec(x)).iter().copied().collect();
    let prior = full_rank_prior(&q);
    let mut last = f64::INFINITY;
    for replicas in 1..=4 {
        let obs: Vec<_> = (0..replicas)
            .map(|_| observation(&h, vec![0.0; m], 0.5, y.clone()))
            .collect();
        let fro = dense_cov(&posterior_factorized(&prior, &obs, &tight()).unwrap()).norm();
        assert!(fro <= last);
        last = fro;
    }
}

#[test]
fn posterior_never_exceeds_prior_variance() {
    let mut r = rng(23);
    let (n, m, s2) = (15, 5, 0.3);
    let q = random_spd(&mut r, n, 0.5);
    let h = gaussian_matrix(&mut r, m, n);
    let post = posterior_factorized(
        &full_rank_prior(&q),
        &[observation(&h, vec![0.0; m], s2, vec![1.0; m])],
        &tight(),
    )
    .unwrap();
    let prior_cov = q.clone().cholesky().unwrap().inverse();
    for _ in 0..10 {
        let v = DVector::from_vec(gaussian_vec(&mut r, n));
        let pv = DVector::from_vec(post.covariance.apply(v.as_slice()).unwrap());
        assert!(v.dot(&pv) <= v.dot(&(&prior_cov * &v)) + 1e-8);
    }
}

#[test]
fn mean_solves_normal_equations() {
    let mut r = rng(24);
    let (n, m, s2) = (30, 20, 0.4);
    let q = random_spd(&mut r, n, 0.1);
    let h = gaussian_matrix(&mut r, m, n);
    let y = gaussian_vec(&mut r, m);
    let opts = PosteriorOptions::default();
    let post = posterior_factorized(
        &full_rank_prior(&q),
        &[observation(&h, vec![0.0; m], s2, y.clone())],
        &opts,
    )
    .unwrap();
    let k = h.transpose() * &h + &q * s2;
    let rhs = h.transpose() * DVector::from_vec(y);
    let resid = (&k * DVector::from_vec(post.mean) - &rhs).norm();
    assert!(resid <= opts.cg_tol * rhs.norm() * 1.0001);
}

#[test]
fn covariance_columns_match_explicit_inverse() {
    let mut r = rng(25);
    let (n, m, s2) = (40, 25, 0.9);
    let q = random_spd(&mut r, n, 0.2);
    let h = gaussian_matrix(&mut r, m, n);
    let post = posterior_factorized(
        &full_rank_prior(&q),
        &[observation(&h, vec![0.0; m], s2, vec![0.0; m])],
        &tight(),
    )
    .unwrap();
    let cov = (h.transpose() * &h + &q * s2).cholesky().unwrap().inverse() * s2;
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|i| covariance_column(&post, i).unwrap())
        .collect();
    for i in 0..n {
        let want: Vec<f64> = cov.column(i).iter().copied().collect();
        assert!(max_abs_diff(&cols[i], &want) <= 1e-8 * cov.amax());
        for j in 0..n {
            assert!((cols[i][j] - cols[j][i]).abs() <= 1e-6);
        }
    }
}

fn stable_transition(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> DMatrix<f64> {
    // Frobenius norm bounds the spectral radius.
    let a = gaussian_matrix(r, n, n);
    let f = a.norm();
    a * (0.8 / f)
}

#[test]
fn kalman_smoother_matches_stacked_conditioning() {
    let mut r = rng(26);
    let (n, m, steps) = (4, 2, 20);
    let a: Vec<DMatrix<f64>> = (0..steps).map(|_| stable_transition(&mut r, n)).collect();
    let qs: Vec<DMatrix<f64>> = (0..steps).map(|_| random_spd(&mut r, n, 0.1)).collect();
    let hs: Vec<DMatrix<f64>> = (0..steps).map(|_| gaussian_matrix(&mut r, m, n)).collect();
    let rs: Vec<DMatrix<f64>> = (0..steps).map(|_| random_spd(&mut r, m, 0.2)).collect();
    let m0 = DVector::from_vec(gaussian_vec(&mut r, n));
    let p0 = random_spd(&mut r, n, 0.5);
    let ys: Vec<DVector<f64>> = (0..steps)
        .map(|_| DVector::from_vec(gaussian_vec(&mut r, m)))
        .collect();

    let model = DenseLgss {
        initial_mean: m0.clone(),
        initial_cov: p0.clone(),
        transitions: a.clone(),
        process_covs: qs.clone(),
        obs_mats: hs.clone(),
        noise_covs: rs.clone(),
    };
    let smoothed = kalman_rts_oracle(&model, &ys).unwrap();

    // Joint prior of the stacked state.
    let big = n * steps;
    let mut mean = DVector::zeros(big);
    let mut marg: Vec<DMatrix<f64>> = Vec::new();
    let mut cov = DMatrix::zeros(big, big);
    for t in 0..steps {
        let (mt, pt) = if t == 0 {
            (m0.clone(), p0.clone())
        } else {
            let prev = mean.rows(n * (t - 1), n).into_owned();
            (
                &a[t] * prev,
                &a[t] * &marg[t - 1] * a[t].transpose() + &qs[t],
            )
        };
        mean.rows_mut(n * t, n).copy_from(&mt);
        marg.push(pt.clone());
        cov.view_mut((n * t, n * t), (n, n)).copy_from(&pt);
        // Cross terms Cov(x_t, x_s) = A_t Cov(x_{t-1}, x_s) for s < t.
        for s in 0..t {
            let prev = cov.view((n * (t - 1), n * s), (n, n)).into_owned();
            let block = &a[t] * prev;
            cov.view_mut((n * t, n * s), (n, n)).copy_from(&block);
            cov.view_mut((n * s, n * t), (n, n))
                .copy_from(&block.transpose());
        }
    }
    let mut hbig = DMatrix::zeros(m * steps, big);
    let mut rbig = DMatrix::zeros(m * steps, m * steps);
    let mut ybig = DVector::zeros(m * steps);
    for t in 0..steps {
        hbig.view_mut((m * t, n * t), (m, n)).copy_from(&hs[t]);
        rbig.view_mut((m * t, m * t), (m, m)).copy_from(&rs[t]);
        ybig.rows_mut(m * t, m).copy_from(&ys[t]);
    }
    let innov = &hbig * &cov * hbig.transpose() + rbig;
    let gain = &cov * hbig.transpose() * innov.cholesky().unwrap().inverse();
    let post_mean = &mean + &gain * (ybig - &hbig * &mean);
    let post_cov = &cov - &gain * &hbig * &cov;

    for (t, p) in smoothed.iter().enumerate() {
        let want_m = post_mean.rows(n * t, n).into_owned();
        let want_c = post_cov.view((n * t, n * t), (n, n)).into_owned();
        let got_c = dense_cov(p);
        assert!(
            (DVector::from_vec(p.mean.clone()) - &want_m).norm() <= 1e-8 * want_m.norm().max(1.0),
            "mean t={t}"
        );
        assert!(
            (got_c - &want_c).norm() <= 1e-8 * want_c.norm(),
            "cov t={t}"
        );
    }
}

#[test]
fn kalman_without_dynamics_reduces_to_factorized_posterior() {
    let mut r = rng(27);
    let (n, m, steps, s2) = (6, 3, 5, 0.5);
    let q = random_spd(&mut r, n, 0.5);
    let prior_cov = q.clone().cholesky().unwrap().inverse();
    let hs: Vec<DMatrix<f64>> = (0..steps).map(|_| gaussian_matrix(&mut r, m, n)).collect();
    let ys: Vec<DVector<f64>> = (0..steps)
        .map(|_| DVector::from_vec(gaussian_vec(&mut r, m)))
        .collect();
    let model = DenseLgss {
        initial_mean: DVector::zeros(n),
        initial_cov: prior_cov.clone(),
        transitions: vec![DMatrix::zeros(n, n); steps],
        process_covs: vec![prior_cov; steps],
        obs_mats: hs.clone(),
        noise_covs: vec![DMatrix::identity(m, m) * s2; steps],
    };
    let smoothed = kalman_rts_oracle(&model, &ys).unwrap();
    let prior = full_rank_prior(&q);
    for t in 0..steps {
        let obs = observation(&hs[t], vec![0.0; m], s2, ys[t].iter().copied().collect());
        let post = posterior_factorized(&prior, &[obs], &tight()).unwrap();
        assert!(max_abs_diff(&post.mean, &smoothed[t].mean) < 1e-10);
        let diff = (dense_cov(&post) - dense_cov(&smoothed[t])).amax();
        assert!(diff < 1e-10, "t={t}: {diff:e}");
        assert!(matches!(smoothed[t].covariance, Covariance::Dense(_)));
    }
}
