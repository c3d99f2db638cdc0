//! Desk-scale 2D decaying turbulence and passive-scalar transport.
//!
//! The dynamics are advanced in vorticity form on a periodic grid:
//!
//! ```text
//! w   = curl x
//! w+  = w + dt (alpha lap(w) - x . grad(w))
//! x+  = biot_savart(w+) + theta
//! ```
//!
//! Gradient, curl and divergence use second-order central differences, the
//! diffusion uses the 5-point Laplacian, and the Biot-Savart step inverts
//! the central-difference curl of the perpendicular gradient exactly in
//! Fourier space. With these choices `div(biot_savart(w))` vanishes to
//! rounding and `curl(biot_savart(w)) = w` on every resolvable mode.

mod grid;
mod random;
mod spectral;
mod transport;

pub use grid::Grid2D;
pub use random::{band_limited_scalar, band_limited_velocity};

use rustfft::num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::pod::{ReducedBasis, StateTrajectory};
use nalgebra::DVector;
use spectral::Spectral;

/// Forcing terms `theta_1 .. theta_T`; `theta_1` is the initial state.
#[derive(Debug, Clone)]
pub struct ForcingSequence {
    pub thetas: Vec<Vec<f64>>,
}

impl ForcingSequence {
    /// Initial condition followed by `steps - 1` zero forcings.
    pub fn decaying(initial: Vec<f64>, steps: usize) -> Self {
        let n = initial.len();
        let mut thetas = vec![initial];
        thetas.extend((1..steps).map(|_| vec![0.0; n]));
        Self { thetas }
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }
}

/// Discrete operators and parameters of the turbulence model.
#[derive(Clone)]
pub struct FluidModel {
    grid: Grid2D,
    alpha: f64,
    dt: f64,
    spectral: Spectral,
}

impl std::fmt::Debug for FluidModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FluidModel")
            .field("grid", &self.grid)
            .field("alpha", &self.alpha)
            .field("dt", &self.dt)
            .finish()
    }
}

impl FluidModel {
    pub fn new(grid: Grid2D, alpha: f64, dt: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dissipation must be non-negative, got {alpha}"
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {dt}"
            )));
        }
        Ok(Self {
            spectral: Spectral::new(&grid),
            grid,
            alpha,
            dt,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// 5-point Laplacian of a scalar field.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let inv_h2 = 1.0 / (g.spacing * g.spacing);
        (0..g.pixels())
            .map(|s| {
                (f[g.east(s)] + f[g.west(s)] + f[g.north(s)] + f[g.south(s)] - 4.0 * f[s]) * inv_h2
            })
            .collect()
    }

    /// Central-difference gradient of a scalar field, interleaved.
    pub fn gradient(&self, f: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let inv = 0.5 / g.spacing;
        let mut out = vec![0.0; g.state_dim()];
        for s in 0..g.pixels() {
            out[2 * s] = (f[g.east(s)] - f[g.west(s)]) * inv;
            out[2 * s + 1] = (f[g.north(s)] - f[g.south(s)]) * inv;
        }
        out
    }

    /// Central-difference divergence; the negative adjoint of [`gradient`](Self::gradient).
    pub fn divergence(&self, x: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let inv = 0.5 / g.spacing;
        (0..g.pixels())
            .map(|s| {
                (x[2 * g.east(s)] - x[2 * g.west(s)] + x[2 * g.north(s) + 1]
                    - x[2 * g.south(s) + 1])
                    * inv
            })
            .collect()
    }

    /// Central-difference vorticity `dv/dx - du/dy`.
    pub fn curl(&self, x: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let inv = 0.5 / g.spacing;
        (0..g.pixels())
            .map(|s| {
                (x[2 * g.east(s) + 1] - x[2 * g.west(s) + 1] - x[2 * g.north(s)]
                    + x[2 * g.south(s)])
                    * inv
            })
            .collect()
    }

    /// Stream function `psi` with `-(Dx^2 + Dy^2) psi = w` on every mode
    /// where the central-difference symbol is non-zero.
    pub fn stream_function(&self, vorticity: &[f64]) -> Vec<f64> {
        let h = self.grid.spacing;
        let (w, hgt) = (self.spectral.width(), self.spectral.height());
        let mut spec = self.spectral.forward(vorticity);
        for (s, c) in spec.iter_mut().enumerate() {
            let (kx, ky) = self.spectral.wavenumbers(s);
            let sx = (2.0 * std::f64::consts::PI * kx as f64 / w as f64).sin();
            let sy = (2.0 * std::f64::consts::PI * ky as f64 / hgt as f64).sin();
            let symbol = (sx * sx + sy * sy) / (h * h);
            *c = if symbol > 1e-12 / (h * h) {
                *c / symbol
            } else {
                Complex64::default()
            };
        }
        self.spectral.inverse_real(spec)
    }

    /// Divergence-free velocity `(D_y psi, -D_x psi)` carrying `vorticity`.
    pub fn biot_savart(&self, vorticity: &[f64]) -> Vec<f64> {
        let psi = self.stream_function(vorticity);
        let grad = self.gradient(&psi);
        let mut out = vec![0.0; grad.len()];
        for s in 0..self.grid.pixels() {
            out[2 * s] = grad[2 * s + 1];
            out[2 * s + 1] = -grad[2 * s];
        }
        out
    }

    /// `x . grad(w)`, pointwise.
    pub fn advect(&self, x: &[f64], vorticity: &[f64]) -> Vec<f64> {
        let grad = self.gradient(vorticity);
        (0..self.grid.pixels())
            .map(|s| x[2 * s] * grad[2 * s] + x[2 * s + 1] * grad[2 * s + 1])
            .collect()
    }

    /// Largest per-pixel speed times `dt / spacing`.
    pub fn cfl_number(&self, x: &[f64]) -> f64 {
        let vmax = x
            .chunks_exact(2)
            .map(|p| p[0].hypot(p[1]))
            .fold(0.0_f64, f64::max);
        vmax * self.dt / self.grid.spacing
    }

    /// Vorticity after one explicit Euler step of diffusion and advection.
    pub fn vorticity_update(&self, x: &[f64], vorticity: &[f64]) -> Vec<f64> {
        let lap = self.laplacian(vorticity);
        let adv = self.advect(x, vorticity);
        vorticity
            .iter()
            .zip(lap.iter().zip(&adv))
            .map(|(w, (l, a))| w + self.dt * (self.alpha * l - a))
            .collect()
    }

    /// One step of the high-dimensional recursion.
    pub fn step(&self, x: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.state_dim();
        check_len(n, x.len())?;
        check_len(n, theta.len())?;
        let cfl = self.cfl_number(x);
        if cfl > 1.0 {
            return Err(Error::CflViolation(cfl));
        }
        let w = self.curl(x);
        let w_next = self.vorticity_update(x, &w);
        let mut out = self.biot_savart(&w_next);
        for (o, t) in out.iter_mut().zip(theta) {
            *o += t;
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(out)
    }

    /// `x_1 = theta_1`, `x_{t+1} = step(x_t, theta_{t+1})`.
    pub fn simulate(&self, forcing: &ForcingSequence) -> Result<StateTrajectory> {
        let first = forcing
            .thetas
            .first()
            .ok_or_else(|| Error::InvalidArgument("forcing needs T >= 1".into()))?;
        check_len(self.grid.state_dim(), first.len())?;
        let mut states = vec![first.clone()];
        for theta in &forcing.thetas[1..] {
            let next = self.step(states.last().expect("non-empty"), theta)?;
            states.push(next);
        }
        StateTrajectory::new(states)?.with_grid(self.grid)
    }

    /// `u* step(u z, theta)`.
    pub fn galerkin_step(
        &self,
        basis: &ReducedBasis,
        z: &[f64],
        theta: &[f64],
    ) -> Result<Vec<f64>> {
        check_len(self.grid.state_dim(), basis.dim())?;
        check_len(basis.k(), z.len())?;
        let full = basis.columns() * DVector::from_column_slice(z);
        let next = self.step(full.as_slice(), theta)?;
        Ok(basis.columns().tr_mul(&DVector::from_vec(next)).data.into())
    }

    /// Reduced recursion `z_1 = u* theta_1`, `z_t = galerkin_step(z_{t-1}, theta_t)`.
    pub fn galerkin_simulate(
        &self,
        basis: &ReducedBasis,
        forcing: &ForcingSequence,
    ) -> Result<Vec<Vec<f64>>> {
        let first = forcing
            .thetas
            .first()
            .ok_or_else(|| Error::InvalidArgument("forcing needs T >= 1".into()))?;
        check_len(basis.dim(), first.len())?;
        let mut zs: Vec<Vec<f64>> = vec![basis
            .columns()
            .tr_mul(&DVector::from_column_slice(first))
            .data
            .into()];
        for theta in &forcing.thetas[1..] {
            let next = self.galerkin_step(basis, zs.last().expect("non-empty"), theta)?;
            zs.push(next);
        }
        Ok(zs)
    }

    /// Semi-Lagrangian transport of a scalar image over one `dt`.
    pub fn scalar_transport(&self, image: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.grid.pixels(), image.len())?;
        check_len(self.grid.state_dim(), x.len())?;
        let cfl = self.cfl_number(x);
        if cfl > 1.0 {
            return Err(Error::CflViolation(cfl));
        }
        Ok(transport::semi_lagrangian(&self.grid, self.dt, image, x))
    }
}
