//! Optic-flow observation model, gradient smoothness prior, and per-pixel
//! diagnostic maps.

mod stats;

pub use stats::spearman;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::fluidsim::Grid2D;
use crate::hmm::{
    covariance_column, DegenerateGaussianPrior, GaussianPosterior, LinearObservation,
    ObservationOperator,
};
use crate::krylov::{LinearOperator, SymmetricOperator};

/// Marker for pixels where the normalized error is undefined (zero truth).
pub const UNDEFINED_PIXEL: f64 = f64::NAN;

/// Two consecutive frames of a transported scalar field.
#[derive(Debug, Clone)]
pub struct ImagePair {
    pub grid: Grid2D,
    pub frame_a: Vec<f64>,
    pub frame_b: Vec<f64>,
}

impl ImagePair {
    pub fn new(grid: Grid2D, frame_a: Vec<f64>, frame_b: Vec<f64>) -> Result<Self> {
        let m = grid.pixels();
        if frame_a.len() != m || frame_b.len() != m {
            return Err(Error::GridMismatch(format!(
                "frames have {} and {} pixels, grid has {m}",
                frame_a.len(),
                frame_b.len()
            )));
        }
        if frame_a.iter().chain(&frame_b).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            grid,
            frame_a,
            frame_b,
        })
    }

    /// Intensity variation `frame_b - frame_a`.
    pub fn variation(&self) -> Vec<f64> {
        self.frame_b
            .iter()
            .zip(&self.frame_a)
            .map(|(b, a)| b - a)
            .collect()
    }
}

/// Linearized brightness constancy: `(H x)_s = -(I_x u_s + I_y v_s)`, with
/// central-difference gradients of the first frame.
#[derive(Debug, Clone)]
pub struct BrightnessConstancy {
    grad_x: Vec<f64>,
    grad_y: Vec<f64>,
}

impl BrightnessConstancy {
    pub fn from_image(grid: &Grid2D, image: &[f64]) -> Self {
        let inv = 0.5 / grid.spacing;
        let m = grid.pixels();
        let mut grad_x = vec![0.0; m];
        let mut grad_y = vec![0.0; m];
        for s in 0..m {
            grad_x[s] = (image[grid.east(s)] - image[grid.west(s)]) * inv;
            grad_y[s] = (image[grid.north(s)] - image[grid.south(s)]) * inv;
        }
        Self { grad_x, grad_y }
    }

    /// Mean of `|grad I|^2` over the image.
    pub fn mean_squared_gradient(&self) -> f64 {
        let m = self.grad_x.len() as f64;
        self.grad_x
            .iter()
            .zip(&self.grad_y)
            .map(|(a, b)| a * a + b * b)
            .sum::<f64>()
            / m
    }
}

impl ObservationOperator for BrightnessConstancy {
    fn nrows(&self) -> usize {
        self.grad_x.len()
    }
    fn ncols(&self) -> usize {
        2 * self.grad_x.len()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.grad_x.len())
            .map(|s| -(self.grad_x[s] * x[2 * s] + self.grad_y[s] * x[2 * s + 1]))
            .collect()
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols()];
        for s in 0..self.grad_x.len() {
            out[2 * s] = -self.grad_x[s] * y[s];
            out[2 * s + 1] = -self.grad_y[s] * y[s];
        }
        out
    }
    fn gram_diagonal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols()];
        for s in 0..self.grad_x.len() {
            out[2 * s] = self.grad_x[s] * self.grad_x[s];
            out[2 * s + 1] = self.grad_y[s] * self.grad_y[s];
        }
        out
    }
}

/// Observation `y = frame_b - frame_a` with the brightness-constancy
/// operator of `frame_a` and zero offset.
pub fn build_observation(pair: &ImagePair, noise_var: f64) -> Result<LinearObservation> {
    let op = BrightnessConstancy::from_image(&pair.grid, &pair.frame_a);
    let m = pair.grid.pixels();
    LinearObservation::new(Arc::new(op), vec![0.0; m], noise_var, pair.variation())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientPriorSpec {
    pub weight: f64,
}

/// `weight * D* D`, with `D` the periodic forward differences of both
/// velocity components along both axes. Equals `-weight * lap5` per
/// component.
#[derive(Debug, Clone)]
pub struct GradientPrecision {
    grid: Grid2D,
    weight: f64,
}

impl LinearOperator for GradientPrecision {
    fn dim(&self) -> usize {
        self.grid.state_dim()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        let g = &self.grid;
        let c = self.weight / (g.spacing * g.spacing);
        let mut out = vec![0.0; x.len()];
        for s in 0..g.pixels() {
            let (e, w, n, so) = (g.east(s), g.west(s), g.north(s), g.south(s));
            for k in 0..2 {
                out[2 * s + k] = c
                    * (4.0 * x[2 * s + k]
                        - x[2 * e + k]
                        - x[2 * w + k]
                        - x[2 * n + k]
                        - x[2 * so + k]);
            }
        }
        Ok(out)
    }

    fn diagonal(&self) -> Result<Vec<f64>> {
        let g = &self.grid;
        Ok(vec![
            4.0 * self.weight / (g.spacing * g.spacing);
            self.dim()
        ])
    }
}
impl SymmetricOperator for GradientPrecision {}

/// Horn-Schunck-type smoothness prior. Its null space (constant flows,
/// one per component) is attached so the posterior can detect when the
/// observations leave it undetermined.
pub fn gradient_prior(spec: GradientPriorSpec, grid: &Grid2D) -> Result<DegenerateGaussianPrior> {
    if !(spec.weight > 0.0) || !spec.weight.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "prior weight must be positive, got {}",
            spec.weight
        )));
    }
    let m = grid.pixels();
    let c = 1.0 / (m as f64).sqrt();
    let mut ex = vec![0.0; 2 * m];
    let mut ey = vec![0.0; 2 * m];
    for s in 0..m {
        ex[2 * s] = c;
        ey[2 * s + 1] = c;
    }
    let op = GradientPrecision {
        grid: *grid,
        weight: spec.weight,
    };
    Ok(DegenerateGaussianPrior::new(Arc::new(op)).with_null_space(vec![ex, ey]))
}

/// Frobenius norm of each pixel's 2x2 posterior covariance block.
pub fn covariance_frobenius_map(post: &GaussianPosterior, grid: &Grid2D) -> Result<Vec<f64>> {
    check_len(grid.state_dim(), post.dim())?;
    (0..grid.pixels())
        .into_par_iter()
        .map(|s| {
            let cu = covariance_column(post, 2 * s)?;
            let cv = covariance_column(post, 2 * s + 1)?;
            let block = [cu[2 * s], cu[2 * s + 1], cv[2 * s], cv[2 * s + 1]];
            Ok(block.iter().map(|b| b * b).sum::<f64>().sqrt())
        })
        .collect()
}

/// Per-pixel `|truth_s - mean_s|^2 / |truth_s|^2`; pixels with zero truth
/// carry [`UNDEFINED_PIXEL`].
pub fn pixel_error_map(truth: &[f64], mean: &[f64], grid: &Grid2D) -> Result<Vec<f64>> {
    check_len(grid.state_dim(), truth.len())?;
    check_len(grid.state_dim(), mean.len())?;
    Ok(truth
        .chunks_exact(2)
        .zip(mean.chunks_exact(2))
        .map(|(t, m)| {
            let denom = t[0] * t[0] + t[1] * t[1];
            if denom == 0.0 {
                UNDEFINED_PIXEL
            } else {
                ((t[0] - m[0]).powi(2) + (t[1] - m[1]).powi(2)) / denom
            }
        })
        .collect())
}
