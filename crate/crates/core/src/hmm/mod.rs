//! Closed-form Gaussian posteriors for the linear-Gaussian hidden Markov
//! model with a vanishing transition, plus a dense Kalman/RTS smoother for
//! the general linear case.
//!
//! Per time step the posterior is
//!
//! ```text
//! K     = sum_i H_i* H_i + s2 q + eps I
//! mean  = K^{-1} sum_i H_i* (y_i - xi_i)
//! cov   = s2 K^{-1}
//! ```
//!
//! with `K^{-1}` never formed: every covariance product is a CG solve.

mod kalman;
mod observation;

pub use kalman::{kalman_rts_oracle, DenseLgss};
pub use observation::{
    DenseObservation, IdentityObservation, LinearObservation, ObservationOperator,
};

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_len, Error, Result};
use crate::krylov::{preconditioned_cg, LinearOperator, SymmetricOperator};
use crate::vecops::{axpy, dot, scale};

/// Zero-mean Gaussian prior given by a (possibly rank-deficient) precision.
#[derive(Clone)]
pub struct DegenerateGaussianPrior {
    pub precision: Arc<dyn SymmetricOperator>,
    /// Orthonormal basis of the precision's null space, when known. `None`
    /// means "unknown"; an empty list means full rank.
    pub null_space: Option<Vec<Vec<f64>>>,
}

impl DegenerateGaussianPrior {
    pub fn new(precision: Arc<dyn SymmetricOperator>) -> Self {
        Self {
            precision,
            null_space: None,
        }
    }

    pub fn with_null_space(mut self, basis: Vec<Vec<f64>>) -> Self {
        self.null_space = Some(basis);
        self
    }

    pub fn full_rank(mut self) -> Self {
        self.null_space = Some(Vec::new());
        self
    }

    pub fn dim(&self) -> usize {
        self.precision.dim()
    }
}

impl std::fmt::Debug for DegenerateGaussianPrior {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DegenerateGaussianPrior")
            .field("dim", &self.dim())
            .field("null_space_dim", &self.null_space.as_ref().map(Vec::len))
            .finish()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PosteriorOptions {
    /// Relative residual target for every CG solve.
    pub cg_tol: f64,
    /// Defaults to `max(10 sqrt(n), 2n)` when `None`; the larger term only
    /// matters for small, badly conditioned systems.
    pub max_iter: Option<usize>,
}

impl Default for PosteriorOptions {
    fn default() -> Self {
        Self {
            cg_tol: 1e-8,
            max_iter: None,
        }
    }
}

impl PosteriorOptions {
    pub fn max_iter_for(&self, n: usize) -> usize {
        self.max_iter.unwrap_or_else(|| {
            ((10.0 * (n as f64).sqrt()).ceil() as usize)
                .max(2 * n)
                .max(10)
        })
    }
}

/// The normal-equation operator `sum_i H_i* H_i + s2 q + eps I`.
pub struct PosteriorSystem {
    prior: DegenerateGaussianPrior,
    observations: Vec<Arc<dyn ObservationOperator>>,
    sigma2: f64,
    epsilon: f64,
}

impl PosteriorSystem {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

impl LinearOperator for PosteriorSystem {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        let mut out = self.prior.precision.apply(x)?;
        scale(self.sigma2, &mut out);
        for h in &self.observations {
            let hx = h.apply(x);
            axpy(1.0, &h.apply_adjoint(&hx), &mut out);
        }
        if self.epsilon != 0.0 {
            axpy(self.epsilon, x, &mut out);
        }
        Ok(out)
    }

    fn diagonal(&self) -> Result<Vec<f64>> {
        let mut d = self.prior.precision.diagonal()?;
        scale(self.sigma2, &mut d);
        for h in &self.observations {
            axpy(1.0, &h.gram_diagonal(), &mut d);
        }
        for v in d.iter_mut() {
            *v += self.epsilon;
        }
        Ok(d)
    }
}
impl SymmetricOperator for PosteriorSystem {}

/// `s2 K^{-1}`, applied through CG.
#[derive(Clone)]
pub struct ImplicitCovariance {
    system: Arc<PosteriorSystem>,
    /// Jacobi preconditioner; `None` when the diagonal has a zero entry.
    inv_diag: Option<Arc<Vec<f64>>>,
    cg_tol: f64,
    max_iter: usize,
}

impl ImplicitCovariance {
    pub fn system(&self) -> &PosteriorSystem {
        &self.system
    }
}

/// Posterior covariance representation.
#[derive(Clone)]
pub enum Covariance {
    /// Degenerate (point-mass) posterior.
    Zero {
        dim: usize,
    },
    Dense(DMatrix<f64>),
    Implicit(ImplicitCovariance),
}

impl std::fmt::Debug for Covariance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Covariance::Zero { dim } => write!(f, "Covariance::Zero({dim})"),
            Covariance::Dense(m) => write!(f, "Covariance::Dense({}x{})", m.nrows(), m.ncols()),
            Covariance::Implicit(c) => write!(f, "Covariance::Implicit(n={})", c.system.dim()),
        }
    }
}

impl LinearOperator for Covariance {
    fn dim(&self) -> usize {
        match self {
            Covariance::Zero { dim } => *dim,
            Covariance::Dense(m) => m.nrows(),
            Covariance::Implicit(c) => c.system.dim(),
        }
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        match self {
            Covariance::Zero { dim } => Ok(vec![0.0; *dim]),
            Covariance::Dense(m) => {
                let v = m * nalgebra::DVector::from_column_slice(x);
                Ok(v.data.into())
            }
            Covariance::Implicit(c) => {
                let inv = c.inv_diag.as_deref().map(Vec::as_slice);
                let mut out =
                    preconditioned_cg(c.system.as_ref(), x, inv, c.cg_tol, c.max_iter)?.solution;
                scale(c.system.sigma2, &mut out);
                Ok(out)
            }
        }
    }
}
impl SymmetricOperator for Covariance {}

/// Posterior mean and covariance of one hidden state.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    pub mean: Vec<f64>,
    pub covariance: Covariance,
    /// Diagonal shift actually added to the normal equations (0 if none).
    pub regularization: f64,
}

impl GaussianPosterior {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// A point-mass posterior at `mean`.
    pub fn certain(mean: Vec<f64>) -> Self {
        let dim = mean.len();
        Self {
            mean,
            covariance: Covariance::Zero { dim },
            regularization: 0.0,
        }
    }

    pub fn dense(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        check_len(mean.len(), cov.nrows())?;
        check_len(mean.len(), cov.ncols())?;
        Ok(Self {
            mean,
            covariance: Covariance::Dense(cov),
            regularization: 0.0,
        })
    }
}

/// Posterior of one time step under the vanishing-transition prior, given
/// one or more observation replicas sharing the noise variance.
pub fn posterior_factorized(
    prior: &DegenerateGaussianPrior,
    observations: &[LinearObservation],
    opts: &PosteriorOptions,
) -> Result<GaussianPosterior> {
    let n = prior.dim();
    let first = observations
        .first()
        .ok_or_else(|| Error::InvalidArgument("at least one observation is required".into()))?;
    let sigma2 = first.noise_var;
    for obs in observations {
        check_len(n, obs.obs_op.ncols())?;
        if obs.noise_var != sigma2 {
            return Err(Error::InvalidArgument(
                "observation replicas must share the noise variance".into(),
            ));
        }
    }

    let mut rhs = vec![0.0; n];
    for obs in observations {
        let resid: Vec<f64> = obs
            .data
            .iter()
            .zip(&obs.offset)
            .map(|(y, xi)| y - xi)
            .collect();
        axpy(1.0, &obs.obs_op.apply_adjoint(&resid), &mut rhs);
    }

    let ops: Vec<Arc<dyn ObservationOperator>> =
        observations.iter().map(|o| o.obs_op.clone()).collect();
    let bare = PosteriorSystem {
        prior: prior.clone(),
        observations: ops,
        sigma2,
        epsilon: 0.0,
    };
    let eps_candidate = 1e-8 * bare.diagonal()?.iter().sum::<f64>() / n as f64;
    let max_iter = opts.max_iter_for(n);

    let needs_shift = match &prior.null_space {
        Some(basis) => !null_space_observed(basis, &bare.observations, eps_candidate)?,
        None => false,
    };

    let solve = |system: PosteriorSystem| -> Result<GaussianPosterior> {
        let system = Arc::new(system);
        let diag = system.diagonal()?;
        let inv_diag = diag
            .iter()
            .all(|&d| d > 0.0)
            .then(|| Arc::new(diag.iter().map(|d| 1.0 / d).collect()));
        let mean = preconditioned_cg(
            system.as_ref(),
            &rhs,
            inv_diag.as_deref().map(Vec::as_slice),
            opts.cg_tol,
            max_iter,
        )?
        .solution;
        let regularization = system.epsilon;
        Ok(GaussianPosterior {
            mean,
            covariance: Covariance::Implicit(ImplicitCovariance {
                system,
                inv_diag,
                cg_tol: opts.cg_tol,
                max_iter,
            }),
            regularization,
        })
    };

    let shifted = |bare: &PosteriorSystem| PosteriorSystem {
        prior: bare.prior.clone(),
        observations: bare.observations.clone(),
        sigma2,
        epsilon: eps_candidate,
    };

    if needs_shift {
        return solve(shifted(&bare));
    }
    match solve(PosteriorSystem {
        epsilon: 0.0,
        ..shifted(&bare)
    }) {
        Ok(p) => Ok(p),
        // Unknown null space: retry once with the shift.
        Err(Error::CgNonConvergence { .. }) if prior.null_space.is_none() => {
            solve(shifted(&bare)).map_err(|_| Error::SingularSystem)
        }
        Err(e) => Err(e),
    }
}

/// True when the observations pin down every direction of the prior's null
/// space, i.e. the restricted Gram matrix `Z* (sum H*H) Z` is positive
/// definite relative to `threshold`.
fn null_space_observed(
    basis: &[Vec<f64>],
    observations: &[Arc<dyn ObservationOperator>],
    threshold: f64,
) -> Result<bool> {
    if basis.is_empty() {
        return Ok(true);
    }
    let d = basis.len();
    let images: Vec<Vec<Vec<f64>>> = observations
        .iter()
        .map(|h| basis.iter().map(|z| h.apply(z)).collect())
        .collect();
    let mut gram = DMatrix::<f64>::zeros(d, d);
    for per_obs in &images {
        for a in 0..d {
            for b in 0..d {
                gram[(a, b)] += dot(&per_obs[a], &per_obs[b]);
            }
        }
    }
    let min_eig = SymmetricEigen::new(gram).eigenvalues.min();
    Ok(min_eig > threshold)
}

/// `p e_index`: one column of the posterior covariance.
pub fn covariance_column(post: &GaussianPosterior, index: usize) -> Result<Vec<f64>> {
    let n = post.dim();
    if index >= n {
        return Err(Error::InvalidArgument(format!(
            "index {index} out of range for dimension {n}"
        )));
    }
    let mut e = vec![0.0; n];
    e[index] = 1.0;
    post.covariance.apply(&e)
}
