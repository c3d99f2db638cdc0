use super::SymmetricOperator;
use crate::error::{check_len, Error, Result};
use crate::vecops::{axpy, dot, norm, sub};

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// `|A x - b| / |b|`, evaluated from a fresh product, not the recurrence.
    pub relative_residual: f64,
}

/// Unpreconditioned conjugate gradient from a zero initial guess.
///
/// Convergence is declared on the true residual `|A x - b| <= tol |b|`.
/// When the recurrence residual claims convergence but the true one
/// disagrees, the iteration restarts from the current iterate.
pub fn conjugate_gradient<A: SymmetricOperator + ?Sized>(
    op: &A,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    preconditioned_cg(op, rhs, None, tol, max_iter)
}

/// Conjugate gradient with an optional Jacobi preconditioner, given as the
/// elementwise inverse of the operator's diagonal (all entries positive).
///
/// The stopping rule is the same as for [`conjugate_gradient`]: the
/// unpreconditioned true residual.
pub fn preconditioned_cg<A: SymmetricOperator + ?Sized>(
    op: &A,
    rhs: &[f64],
    inv_diag: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = op.dim();
    check_len(n, rhs.len())?;
    if let Some(d) = inv_diag {
        check_len(n, d.len())?;
    }
    let rhs_norm = norm(rhs);
    if !rhs_norm.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 {
        return Ok(CgOutcome {
            solution: x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let target = tol * rhs_norm;
    let precondition = |r: &[f64]| -> Vec<f64> {
        match inv_diag {
            Some(d) => r.iter().zip(d).map(|(a, b)| a * b).collect(),
            None => r.to_vec(),
        }
    };

    let mut r = rhs.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;

    while iterations < max_iter {
        let ap = op.apply(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            // Not positive definite along p, or breakdown.
            break;
        }
        let step = rz / pap;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        iterations += 1;

        if norm(&r) <= target {
            let true_r = sub(rhs, &op.apply(&x)?);
            let true_norm = norm(&true_r);
            if true_norm <= target {
                return Ok(CgOutcome {
                    solution: x,
                    iterations,
                    relative_residual: true_norm / rhs_norm,
                });
            }
            r = true_r;
            z = precondition(&r);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }

        z = precondition(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        rz = rz_next;
    }

    let residual = norm(&sub(rhs, &op.apply(&x)?)) / rhs_norm;
    if residual <= tol {
        return Ok(CgOutcome {
            solution: x,
            iterations,
            relative_residual: residual,
        });
    }
    Err(Error::CgNonConvergence {
        iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{DiagonalOperator, IdentityOperator};

    #[test]
    fn identity_returns_rhs() {
        let r = vec![1.0, -2.0, 3.5];
        let out = conjugate_gradient(&IdentityOperator { dim: 3 }, &r, 1e-12, 10).unwrap();
        assert_eq!(out.solution, r);
    }

    #[test]
    fn diagonal_solve() {
        let op = DiagonalOperator {
            diag: vec![2.0, 4.0],
        };
        let out = conjugate_gradient(&op, &[2.0, 8.0], 1e-14, 10).unwrap();
        assert!((out.solution[0] - 1.0).abs() < 1e-14);
        assert!((out.solution[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_rhs_is_zero_solution() {
        let op = DiagonalOperator {
            diag: vec![2.0, 4.0],
        };
        let out = conjugate_gradient(&op, &[0.0, 0.0], 1e-10, 10).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.solution, vec![0.0, 0.0]);
    }

    #[test]
    fn jacobi_solves_diagonal_in_one_step() {
        let diag: Vec<f64> = (1..=50).map(|i| (i * i) as f64).collect();
        let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
        let op = DiagonalOperator { diag };
        let out = preconditioned_cg(&op, &vec![1.0; 50], Some(&inv), 1e-12, 3).unwrap();
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let diag: Vec<f64> = (1..=50).map(|i| (i * i) as f64).collect();
        let op = DiagonalOperator { diag };
        let rhs = vec![1.0; 50];
        assert!(matches!(
            conjugate_gradient(&op, &rhs, 1e-12, 3),
            Err(Error::CgNonConvergence { iterations: 3, .. })
        ));
    }
}
