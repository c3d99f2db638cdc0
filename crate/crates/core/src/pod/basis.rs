use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `trace(S) - sum_{j<=k} s_j`, the optimal expected cost for this `k`.
/// `std_error` is zero unless the trace came from a stochastic estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrailingMass {
    pub value: f64,
    pub std_error: f64,
}

/// An `n x k` matrix with orthonormal columns, with the eigenvalues that
/// selected it (empty for user-supplied bases).
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    columns: DMatrix<f64>,
    spectrum: Vec<f64>,
    trailing_mass: Option<TrailingMass>,
    rank_deficient: bool,
}

impl ReducedBasis {
    pub(crate) fn from_parts(
        columns: DMatrix<f64>,
        spectrum: Vec<f64>,
        trailing_mass: Option<TrailingMass>,
        rank_deficient: bool,
    ) -> Self {
        Self {
            columns,
            spectrum,
            trailing_mass,
            rank_deficient,
        }
    }

    /// Wraps an arbitrary orthonormal block; `u* u = I` is checked to 1e-8.
    pub fn from_columns(columns: DMatrix<f64>) -> Result<Self> {
        let k = columns.ncols();
        let defect = (columns.tr_mul(&columns) - DMatrix::identity(k, k)).amax();
        if defect > 1e-8 {
            return Err(Error::InvalidArgument(format!(
                "columns are not orthonormal (defect {defect:.3e})"
            )));
        }
        Ok(Self {
            columns,
            spectrum: Vec::new(),
            trailing_mass: None,
            rank_deficient: false,
        })
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn trailing_mass(&self) -> Option<TrailingMass> {
        self.trailing_mass
    }

    /// Set when fewer columns than requested could be produced.
    pub fn is_rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn k(&self) -> usize {
        self.columns.ncols()
    }

    /// The leading `k` columns (all of them if fewer are available).
    pub fn truncate(&self, k: usize) -> ReducedBasis {
        let k = k.min(self.k());
        let dropped: f64 = self.spectrum.iter().skip(k).sum();
        ReducedBasis {
            columns: self.columns.columns(0, k).into_owned(),
            spectrum: self.spectrum.iter().take(k).copied().collect(),
            trailing_mass: self.trailing_mass.map(|t| TrailingMass {
                value: t.value + dropped,
                ..t
            }),
            rank_deficient: self.rank_deficient,
        }
    }

    /// `u u*` as an explicit `n x n` matrix. Small problems only.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.columns * self.columns.transpose()
    }

    /// Frobenius distance between the two projectors, computed without
    /// forming them: `|P - Q|_F^2 = k_p + k_q - 2 |U* V|_F^2`.
    pub fn subspace_distance(&self, other: &ReducedBasis) -> f64 {
        let cross = self.columns.tr_mul(&other.columns).norm_squared();
        (self.k() as f64 + other.k() as f64 - 2.0 * cross)
            .max(0.0)
            .sqrt()
    }
}
