use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};

/// A linear map `R^n -> R^m` with its adjoint.
pub trait ObservationOperator: Send + Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64>;

    /// Diagonal of `H* H` (squared column norms).
    fn gram_diagonal(&self) -> Vec<f64> {
        let n = self.ncols();
        let mut e = vec![0.0; n];
        (0..n)
            .map(|j| {
                e[j] = 1.0;
                let col = self.apply(&e);
                e[j] = 0.0;
                col.iter().map(|c| c * c).sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityObservation {
    pub dim: usize,
}

impl ObservationOperator for IdentityObservation {
    fn nrows(&self) -> usize {
        self.dim
    }
    fn ncols(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }
    fn gram_diagonal(&self) -> Vec<f64> {
        vec![1.0; self.dim]
    }
}

#[derive(Debug, Clone)]
pub struct DenseObservation {
    matrix: DMatrix<f64>,
}

impl DenseObservation {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl ObservationOperator for DenseObservation {
    fn nrows(&self) -> usize {
        self.matrix.nrows()
    }
    fn ncols(&self) -> usize {
        self.matrix.ncols()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(x)).data.into()
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        (self.matrix.tr_mul(&DVector::from_column_slice(y)))
            .data
            .into()
    }
}

/// `y = H x + xi + w`, `w ~ N(0, noise_var I)`.
#[derive(Clone)]
pub struct LinearObservation {
    pub obs_op: Arc<dyn ObservationOperator>,
    pub offset: Vec<f64>,
    pub noise_var: f64,
    pub data: Vec<f64>,
}

impl LinearObservation {
    pub fn new(
        obs_op: Arc<dyn ObservationOperator>,
        offset: Vec<f64>,
        noise_var: f64,
        data: Vec<f64>,
    ) -> Result<Self> {
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        check_len(obs_op.nrows(), offset.len())?;
        check_len(obs_op.nrows(), data.len())?;
        Ok(Self {
            obs_op,
            offset,
            noise_var,
            data,
        })
    }
}

impl std::fmt::Debug for LinearObservation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearObservation")
            .field("rows", &self.obs_op.nrows())
            .field("cols", &self.obs_op.ncols())
            .field("noise_var", &self.noise_var)
            .finish()
    }
}
