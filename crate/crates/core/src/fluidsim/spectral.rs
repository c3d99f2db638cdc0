use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Grid2D;

/// Forward/inverse 2D FFT plans for one grid. Plans are immutable and can
/// be shared between threads.
#[derive(Clone)]
pub(crate) struct Spectral {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Spectral {
    pub fn new(grid: &Grid2D) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width: grid.width,
            height: grid.height,
            row_fwd: planner.plan_fft_forward(grid.width),
            row_inv: planner.plan_fft_inverse(grid.width),
            col_fwd: planner.plan_fft_forward(grid.height),
            col_inv: planner.plan_fft_inverse(grid.height),
        }
    }

    fn transform(&self, data: &mut [Complex64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        let (w, h) = (self.width, self.height);
        for r in data.chunks_exact_mut(w) {
            row.process(r);
        }
        let mut column = vec![Complex64::default(); h];
        for c in 0..w {
            for r in 0..h {
                column[r] = data[r * w + c];
            }
            col.process(&mut column);
            for r in 0..h {
                data[r * w + c] = column[r];
            }
        }
    }

    pub fn forward(&self, field: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.row_fwd, &self.col_fwd);
        data
    }

    /// Inverse transform, normalized, real part.
    pub fn inverse_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut data, &self.row_inv, &self.col_inv);
        let norm = 1.0 / (self.width * self.height) as f64;
        data.iter().map(|c| c.re * norm).collect()
    }

    /// Signed integer wavenumbers `(kx, ky)` of spectral entry `s`.
    pub fn wavenumbers(&self, s: usize) -> (i64, i64) {
        let signed = |k: usize, n: usize| {
            if 2 * k > n {
                k as i64 - n as i64
            } else {
                k as i64
            }
        };
        (
            signed(s % self.width, self.width),
            signed(s / self.width, self.height),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}
