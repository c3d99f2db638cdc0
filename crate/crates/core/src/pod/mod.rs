//! Reduced bases: the uncertainty-aware basis built from the posterior
//! second moment, the snapshot baseline, and the cost functionals used to
//! compare them.
//!
//! For a trajectory `x = (x_1 .. x_T)` and an orthonormal `u`, the
//! projection cost is `|x - u u* x|_F^2`. Averaged over the posterior it
//! becomes `trace(S) - trace(u* S u)` with
//! `S = sum_t (p_t + m_t m_t*)`, so the optimal `u` holds the leading
//! eigenvectors of `S` and the optimal cost is the trailing eigenvalue mass.

mod basis;
mod moment;
mod trajectory;

pub use basis::{ReducedBasis, TrailingMass};
pub use moment::{
    trace_estimate, trace_estimate_with, SecondMomentOperator, TraceEstimate, TraceMode,
};
pub use trajectory::StateTrajectory;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_len, Error, Result};
use crate::krylov::{LanczosOptions, LinearOperator};
use crate::vecops::{axpy, dot, norm};

/// `|x - u u* x|_F^2`.
pub fn projection_cost(x: &StateTrajectory, u: &ReducedBasis) -> Result<f64> {
    check_len(u.dim(), x.dim())?;
    let cols = u.columns();
    let mut total = 0.0;
    for state in x.states() {
        let coeffs = cols.tr_mul(&DVector::from_column_slice(state));
        let mut resid = state.clone();
        for (j, c) in coeffs.iter().enumerate() {
            axpy(-c, cols.column(j).as_slice(), &mut resid);
        }
        total += dot(&resid, &resid);
    }
    Ok(total)
}

/// Posterior-expected projection cost `trace(S) - sum_j u_j* S u_j`.
pub fn expected_projection_cost(s: &SecondMomentOperator, u: &ReducedBasis) -> Result<f64> {
    let trace = trace_estimate(s)?;
    expected_projection_cost_with_trace(s, u, trace.value)
}

/// As [`expected_projection_cost`] with a precomputed `trace(S)`.
pub fn expected_projection_cost_with_trace(
    s: &SecondMomentOperator,
    u: &ReducedBasis,
    trace: f64,
) -> Result<f64> {
    check_len(s.dim(), u.dim())?;
    let mut captured = 0.0;
    for col in u.columns().column_iter() {
        let col = col.as_slice();
        captured += dot(col, &s.apply(col)?);
    }
    Ok(trace - captured)
}

/// Leading `k` eigenvectors of the second-moment operator via Lanczos, with
/// the trailing mass attached from an automatically chosen trace estimate.
pub fn uncertainty_aware_basis(
    s: &SecondMomentOperator,
    k: usize,
    krylov_dim: usize,
    seed: u64,
) -> Result<ReducedBasis> {
    let opts = LanczosOptions::new(k, krylov_dim).seed(seed).tol(1e-8);
    uncertainty_aware_basis_with(s, &opts, TraceMode::Auto)
}

pub fn uncertainty_aware_basis_with(
    s: &SecondMomentOperator,
    opts: &LanczosOptions,
    trace_mode: TraceMode,
) -> Result<ReducedBasis> {
    let dec = opts.solve(s)?;
    let trace = trace_estimate_with(s, trace_mode)?;
    let kept: f64 = dec.eigenvalues.iter().sum();
    Ok(ReducedBasis::from_parts(
        dec.eigenvectors,
        dec.eigenvalues,
        Some(TrailingMass {
            value: trace.value - kept,
            std_error: trace.std_error,
        }),
        false,
    ))
}

/// Snapshot POD: leading left singular vectors of the `n x T` estimate
/// matrix, computed through the `T x T` Gram matrix.
///
/// Singular values below `1e-12 s_1` are discarded; if fewer than `k`
/// remain, the available ones are returned and the basis is flagged
/// rank deficient.
pub fn snapshot_basis(estimates: &StateTrajectory, k: usize) -> Result<ReducedBasis> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let x = estimates.to_matrix();
    let t = x.ncols();
    let gram = x.tr_mul(&x);
    let total = gram.trace();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let top = eig.eigenvalues[order[0]].max(0.0);
    let cutoff = 1e-12 * top.sqrt();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut spectrum = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let lambda = eig.eigenvalues[idx];
        if lambda <= 0.0 || lambda.sqrt() <= cutoff || top == 0.0 {
            break;
        }
        let mut u: Vec<f64> = (&x * eig.eigenvectors.column(idx)).data.into();
        // Re-orthogonalize: the Gram route loses orthogonality for small singular values.
        for _ in 0..2 {
            for prev in &columns {
                let c = dot(prev, &u);
                axpy(-c, prev, &mut u);
            }
        }
        let nu = norm(&u);
        if nu <= cutoff {
            break;
        }
        u.iter_mut().for_each(|v| *v /= nu);
        columns.push(u);
        spectrum.push(lambda);
    }

    let found = columns.len();
    let mut mat = DMatrix::zeros(x.nrows(), found);
    for (j, c) in columns.iter().enumerate() {
        mat.set_column(j, &DVector::from_column_slice(c));
    }
    crate::krylov::normalize_signs(&mut mat);
    let kept: f64 = spectrum.iter().sum();
    Ok(ReducedBasis::from_parts(
        mat,
        spectrum,
        Some(TrailingMass {
            value: total - kept,
            std_error: 0.0,
        }),
        found < k,
    ))
}

/// Normalized squared reconstruction error `|x - u u* x|_F^2 / |x|_F^2`.
pub fn reconstruction_error(truth: &StateTrajectory, u: &ReducedBasis) -> Result<f64> {
    let energy = truth.frobenius_sq();
    if energy == 0.0 {
        return Err(Error::ZeroTruth);
    }
    Ok(projection_cost(truth, u)? / energy)
}
