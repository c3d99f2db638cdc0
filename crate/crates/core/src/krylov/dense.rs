use nalgebra::{DMatrix, SymmetricEigen};

use super::{asymmetry, normalize_signs, SpectralDecomposition};
use crate::error::{check_len, Error, Result};

/// Largest matrix accepted by [`dense_eig_oracle`].
pub const DENSE_EIG_LIMIT: usize = 512;

/// Full eigendecomposition of an explicit symmetric matrix, eigenvalues
/// descending, eigenvector signs normalized.
///
/// This is the exact `O(n^3)` route, kept for small problems and as the
/// reference the Lanczos solver is tested against.
pub fn dense_eig_oracle(matrix: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    let n = matrix.nrows();
    check_len(n, matrix.ncols())?;
    if n > DENSE_EIG_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: DENSE_EIG_LIMIT,
        });
    }
    let asym = asymmetry(matrix);
    if asym > 1e-12 * matrix.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = (matrix + matrix.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    normalize_signs(&mut eigenvectors);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}
