use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::fluidsim::Grid2D;

/// A sequence `x_1 .. x_T` of equally sized state vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    states: Vec<Vec<f64>>,
    grid: Option<Grid2D>,
}

impl StateTrajectory {
    pub fn new(states: Vec<Vec<f64>>) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::InvalidArgument("trajectory needs T >= 1".into()))?;
        let n = first.len();
        for s in &states {
            check_len(n, s.len())?;
        }
        Ok(Self { states, grid: None })
    }

    /// Attaches the grid the states live on (`n = 2 * width * height`).
    pub fn with_grid(mut self, grid: Grid2D) -> Result<Self> {
        check_len(grid.state_dim(), self.dim())?;
        self.grid = Some(grid);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn grid(&self) -> Option<&Grid2D> {
        self.grid.as_ref()
    }

    pub fn into_states(self) -> Vec<Vec<f64>> {
        self.states
    }

    /// `n x T`, one column per state.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.len(), |i, t| self.states[t][i])
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.states.iter().flatten().map(|v| v * v).sum()
    }
}
