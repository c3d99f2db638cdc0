#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Haar-ish random orthonormal `n x k` block via QR.
pub fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, n, k).qr().q()
}

/// Symmetric PSD matrix with the given spectrum and random eigenvectors.
pub fn psd_with_spectrum(rng: &mut ChaCha8Rng, spectrum: &[f64]) -> DMatrix<f64> {
    let n = spectrum.len();
    let q = random_orthonormal(rng, n, n);
    let a = &q * DMatrix::from_diagonal(&DVector::from_column_slice(spectrum)) * q.transpose();
    (&a + a.transpose()) * 0.5
}

/// Random SPD matrix `G G* / n + shift I`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, n, n);
    let a = &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * shift;
    (&a + a.transpose()) * 0.5
}

pub fn projector(u: &DMatrix<f64>) -> DMatrix<f64> {
    u * u.transpose()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn vec_norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}
