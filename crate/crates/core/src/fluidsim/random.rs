use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use super::spectral::Spectral;
use super::{FluidModel, Grid2D};

/// Zero-mean, unit-RMS random scalar field whose Fourier content is
/// restricted to wavenumbers `k_lo <= |k| <= k_hi` (cycles per domain).
pub fn band_limited_scalar(grid: &Grid2D, k_lo: f64, k_hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..grid.pixels())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let spectral = Spectral::new(grid);
    let mut spec = spectral.forward(&noise);
    for (s, c) in spec.iter_mut().enumerate() {
        let (kx, ky) = spectral.wavenumbers(s);
        let k = ((kx * kx + ky * ky) as f64).sqrt();
        if k < k_lo || k > k_hi || k == 0.0 {
            *c = Complex64::default();
        }
    }
    let mut field = spectral.inverse_real(spec);
    let rms = (field.iter().map(|v| v * v).sum::<f64>() / field.len() as f64).sqrt();
    if rms > 0.0 {
        field.iter_mut().for_each(|v| *v /= rms);
    }
    field
}

/// Divergence-free random velocity with band-limited vorticity, scaled so
/// that its largest per-pixel speed equals `max_speed`.
pub fn band_limited_velocity(
    grid: &Grid2D,
    k_lo: f64,
    k_hi: f64,
    max_speed: f64,
    seed: u64,
) -> Vec<f64> {
    let vorticity = band_limited_scalar(grid, k_lo, k_hi, seed);
    let model = FluidModel::new(*grid, 0.0, 1.0).expect("valid parameters");
    let mut x = model.biot_savart(&vorticity);
    let vmax = x
        .chunks_exact(2)
        .map(|p| p[0].hypot(p[1]))
        .fold(0.0_f64, f64::max);
    if vmax > 0.0 {
        x.iter_mut().for_each(|v| *v *= max_speed / vmax);
    }
    x
}
