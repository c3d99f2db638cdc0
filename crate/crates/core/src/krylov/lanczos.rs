use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{normalize_signs, SpectralDecomposition, SymmetricOperator};
use crate::error::{Error, Result};
use crate::vecops::{axpy, dot, norm, scale};

/// Knobs for [`lanczos_topk`]; `max_restarts` defaults to 10.
#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub k: usize,
    pub krylov_dim: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_restarts: usize,
}

impl LanczosOptions {
    pub fn new(k: usize, krylov_dim: usize) -> Self {
        Self {
            k,
            krylov_dim,
            seed: 0,
            tol: 1e-10,
            max_restarts: 10,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// The `k` algebraically largest eigenpairs of a symmetric operator.
///
/// Thick-restart Lanczos with full (two-pass) reorthogonalization. A pair is
/// accepted once its residual `|A u - s u|` falls below `tol * s_1`.
pub fn lanczos_topk<A: SymmetricOperator + ?Sized>(
    op: &A,
    k: usize,
    krylov_dim: usize,
    seed: u64,
    tol: f64,
) -> Result<SpectralDecomposition> {
    let opts = LanczosOptions {
        k,
        krylov_dim,
        seed,
        tol,
        max_restarts: 10,
    };
    Lanczos::new(op, opts)?.run()
}

impl LanczosOptions {
    pub fn solve<A: SymmetricOperator + ?Sized>(&self, op: &A) -> Result<SpectralDecomposition> {
        Lanczos::new(op, *self)?.run()
    }
}

struct Lanczos<'a, A: ?Sized> {
    op: &'a A,
    opts: LanczosOptions,
    n: usize,
    rng: ChaCha8Rng,
    basis: Vec<Vec<f64>>,
    /// Projected matrix `V* A V`, filled column by column.
    proj: DMatrix<f64>,
}

impl<'a, A: SymmetricOperator + ?Sized> Lanczos<'a, A> {
    fn new(op: &'a A, opts: LanczosOptions) -> Result<Self> {
        let n = op.dim();
        if opts.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if opts.krylov_dim > n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: opts.krylov_dim,
            });
        }
        if opts.krylov_dim < opts.k {
            return Err(Error::InvalidArgument(format!(
                "krylov_dim ({}) must be at least k ({})",
                opts.krylov_dim, opts.k
            )));
        }
        Ok(Self {
            op,
            opts,
            n,
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
            basis: Vec::with_capacity(opts.krylov_dim),
            proj: DMatrix::zeros(opts.krylov_dim, opts.krylov_dim),
        })
    }

    fn random_unit(&mut self) -> Option<Vec<f64>> {
        let mut v: Vec<f64> = (0..self.n)
            .map(|_| StandardNormal.sample(&mut self.rng))
            .collect();
        orthogonalize(&self.basis, &mut v);
        let nv = norm(&v);
        if nv <= 1e-10 {
            return None;
        }
        scale(1.0 / nv, &mut v);
        Some(v)
    }

    fn run(mut self) -> Result<SpectralDecomposition> {
        let m = self.opts.krylov_dim;
        let k = self.opts.k;
        let v0 = self
            .random_unit()
            .ok_or(Error::InvalidArgument("empty operator".into()))?;
        self.basis.push(v0);
        let mut next = 0;

        for restart in 0..=self.opts.max_restarts {
            let (residual, beta) = self.extend(next)?;
            let size = self.basis.len();

            let h = self.proj.view((0, 0), (size, size)).into_owned();
            let h = (&h + h.transpose()) * 0.5;
            let (theta, ritz) = sorted_eig(h);
            let scale_ref = theta
                .iter()
                .fold(0.0_f64, |a, t| a.max(t.abs()))
                .max(f64::MIN_POSITIVE);
            let unconverged =
                (0..k).find(|&i| beta * ritz[(size - 1, i)].abs() > self.opts.tol * scale_ref);

            let Some(first_bad) = unconverged else {
                return Ok(self.finish(&theta, &ritz, k));
            };
            if restart == self.opts.max_restarts {
                return Err(Error::NonConvergence(first_bad));
            }

            // Keep the leading Ritz vectors and continue from the residual.
            let keep = (k + (size - k) / 2).min(size - 1).max(1);
            let mut kept = Vec::with_capacity(m);
            for i in 0..keep {
                kept.push(combine(&self.basis, ritz.column(i).as_slice()));
            }
            self.basis = kept;
            self.proj.fill(0.0);
            for i in 0..keep {
                self.proj[(i, i)] = theta[i];
            }
            let mut r = residual;
            orthogonalize(&self.basis, &mut r);
            let nr = norm(&r);
            let v = if nr > 1e-12 * scale_ref {
                scale(1.0 / nr, &mut r);
                r
            } else {
                match self.random_unit() {
                    Some(v) => v,
                    None => return Err(Error::NonConvergence(first_bad)),
                }
            };
            self.basis.push(v);
            next = keep;
        }
        unreachable!("restart loop always returns")
    }

    /// Grows the basis to `krylov_dim` vectors starting with the product of
    /// column `start`. Returns the final residual vector and its norm.
    fn extend(&mut self, start: usize) -> Result<(Vec<f64>, f64)> {
        let m = self.opts.krylov_dim;
        let mut j = start;
        loop {
            let mut w = self.op.apply(&self.basis[j])?;
            let w_norm = norm(&w);
            let mut coeffs = vec![0.0; j + 1];
            for _ in 0..2 {
                for (i, v) in self.basis.iter().enumerate() {
                    let c = dot(v, &w);
                    axpy(-c, v, &mut w);
                    coeffs[i] += c;
                }
            }
            for (i, &c) in coeffs.iter().enumerate() {
                self.proj[(i, j)] = c;
                self.proj[(j, i)] = c;
            }
            let beta = norm(&w);
            if j + 1 == m {
                return Ok((w, beta));
            }
            let next = if beta > 1e-12 * w_norm.max(self.proj[(0, 0)].abs()) {
                scale(1.0 / beta, &mut w);
                Some(w)
            } else {
                // Invariant subspace reached: continue with a fresh direction.
                self.random_unit()
            };
            match next {
                Some(v) => self.basis.push(v),
                // The basis already spans the whole space.
                None => return Ok((vec![0.0; self.n], 0.0)),
            }
            j += 1;
        }
    }

    fn finish(&self, theta: &[f64], ritz: &DMatrix<f64>, k: usize) -> SpectralDecomposition {
        let mut vectors = DMatrix::zeros(self.n, k);
        for i in 0..k {
            let u = combine(&self.basis, ritz.column(i).as_slice());
            vectors.set_column(i, &DVector::from_vec(u));
        }
        normalize_signs(&mut vectors);
        SpectralDecomposition {
            eigenvalues: theta[..k].to_vec(),
            eigenvectors: vectors,
        }
    }
}

fn orthogonalize(basis: &[Vec<f64>], v: &mut [f64]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            axpy(-c, b, v);
        }
    }
}

fn combine(basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; basis[0].len()];
    for (b, &c) in basis.iter().zip(coeffs) {
        axpy(c, b, &mut out);
    }
    out
}

fn sorted_eig(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let size = h.nrows();
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let theta = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(size, size);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (theta, vecs)
}
