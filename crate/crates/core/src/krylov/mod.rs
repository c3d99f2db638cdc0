//! Matrix-free symmetric eigensolver and linear solver.
//!
//! Everything downstream (posterior covariances, the second-moment operator)
//! is only ever available through matrix-vector products, so the solvers
//! here work on the [`LinearOperator`] trait rather than on stored matrices.

mod cg;
mod dense;
mod lanczos;

pub use cg::{conjugate_gradient, preconditioned_cg, CgOutcome};
pub use dense::{dense_eig_oracle, DENSE_EIG_LIMIT};
pub use lanczos::{lanczos_topk, LanczosOptions};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::vecops::{dot, norm};

/// A square linear map on `R^dim`, available only through its action.
///
/// `apply` must be deterministic: the same input always yields bitwise the
/// same output. It is fallible because some operators (posterior
/// covariances) hide an inner iterative solve.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Diagonal entries, by probing with unit vectors unless overridden.
    fn diagonal(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut e = vec![0.0; n];
        let mut out = Vec::with_capacity(n);
        for j in 0..n {
            e[j] = 1.0;
            out.push(self.apply(&e)?[j]);
            e[j] = 0.0;
        }
        Ok(out)
    }

    /// Materializes the operator column by column. Intended for tests and
    /// small problems only.
    fn to_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply(&e)?;
            e[j] = 0.0;
            out.set_column(j, &DVector::from_vec(col));
        }
        Ok(out)
    }
}

/// Marker: `<u, A v> = <A u, v>` for all `u`, `v`.
pub trait SymmetricOperator: LinearOperator {}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).apply(x)
    }
    fn diagonal(&self) -> Result<Vec<f64>> {
        (**self).diagonal()
    }
}
impl<T: SymmetricOperator + ?Sized> SymmetricOperator for &T {}

impl<T: LinearOperator + ?Sized> LinearOperator for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).apply(x)
    }
    fn diagonal(&self) -> Result<Vec<f64>> {
        (**self).diagonal()
    }
}
impl<T: SymmetricOperator + ?Sized> SymmetricOperator for std::sync::Arc<T> {}

#[derive(Debug, Clone, Copy)]
pub struct IdentityOperator {
    pub dim: usize,
}

impl LinearOperator for IdentityOperator {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, x.len())?;
        Ok(x.to_vec())
    }
}
impl SymmetricOperator for IdentityOperator {}

#[derive(Debug, Clone)]
pub struct DiagonalOperator {
    pub diag: Vec<f64>,
}

impl LinearOperator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.diag.len(), x.len())?;
        Ok(x.iter().zip(&self.diag).map(|(a, d)| a * d).collect())
    }
    fn diagonal(&self) -> Result<Vec<f64>> {
        Ok(self.diag.clone())
    }
}
impl SymmetricOperator for DiagonalOperator {}

/// An explicit symmetric matrix behind the operator interface.
#[derive(Debug, Clone)]
pub struct DenseSymmetric {
    matrix: DMatrix<f64>,
}

impl DenseSymmetric {
    /// Accepts `matrix` if it is square and symmetric to `1e-12` relative to
    /// its largest entry; the stored copy is exactly symmetrized.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        check_len(matrix.nrows(), matrix.ncols())?;
        let asym = asymmetry(&matrix);
        let scale = matrix.amax().max(1.0);
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl LinearOperator for DenseSymmetric {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        let v = &self.matrix * DVector::from_column_slice(x);
        Ok(v.data.into())
    }
    fn diagonal(&self) -> Result<Vec<f64>> {
        Ok(self.matrix.diagonal().data.into())
    }
    fn to_dense(&self) -> Result<DMatrix<f64>> {
        Ok(self.matrix.clone())
    }
}
impl SymmetricOperator for DenseSymmetric {}

pub(crate) fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Leading eigenpairs in descending eigenvalue order.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// `n x k`, orthonormal columns.
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Flips each column so that its largest-magnitude entry is positive.
pub(crate) fn normalize_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0.0_f64;
        for &v in col.iter() {
            if v.abs() > best.abs() {
                best = v;
            }
        }
        if best < 0.0 {
            col.neg_mut();
        }
    }
}

/// Monte-Carlo symmetry probe: the worst value over `trials` random pairs of
/// `|<u, Av> - <Au, v>| / (|u| |Av|)`.
pub fn symmetry_defect<A: LinearOperator + ?Sized>(
    op: &A,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let u: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let au = op.apply(&u)?;
        let av = op.apply(&v)?;
        let scale = norm(&u) * norm(&av).max(norm(&au)).max(f64::MIN_POSITIVE);
        worst = worst.max((dot(&u, &av) - dot(&au, &v)).abs() / scale);
    }
    Ok(worst)
}

/// Monte-Carlo PSD probe: the smallest `<v, Av> / |v|^2` seen.
pub fn min_rayleigh_quotient<A: LinearOperator + ?Sized>(
    op: &A,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lowest = f64::INFINITY;
    for _ in 0..trials {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let av = op.apply(&v)?;
        lowest = lowest.min(dot(&v, &av) / dot(&v, &v));
    }
    Ok(lowest)
}
