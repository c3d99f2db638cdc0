use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::hmm::{Covariance, GaussianPosterior};
use crate::krylov::{LinearOperator, SymmetricOperator};
use crate::vecops::{axpy, dot};

/// Largest dimension for which implicit covariance traces are computed
/// exactly (one solve per coordinate).
pub const EXACT_TRACE_LIMIT: usize = 4096;
const HUTCHINSON_PROBES: usize = 64;

/// `v -> sum_t (p_t v + m_t (m_t* v))`.
///
/// The per-step terms are evaluated in parallel and summed in ascending
/// `t`, so the result does not depend on scheduling.
#[derive(Debug, Clone)]
pub struct SecondMomentOperator {
    posteriors: Vec<GaussianPosterior>,
}

impl SecondMomentOperator {
    pub fn new(posteriors: Vec<GaussianPosterior>) -> Result<Self> {
        let first = posteriors
            .first()
            .ok_or_else(|| Error::InvalidArgument("need at least one posterior".into()))?;
        let n = first.dim();
        for p in &posteriors {
            check_len(n, p.dim())?;
            check_len(n, p.covariance.dim())?;
        }
        Ok(Self { posteriors })
    }

    pub fn posteriors(&self) -> &[GaussianPosterior] {
        &self.posteriors
    }

    /// The posterior means as a trajectory.
    pub fn means(&self) -> crate::pod::StateTrajectory {
        crate::pod::StateTrajectory::new(self.posteriors.iter().map(|p| p.mean.clone()).collect())
            .expect("validated on construction")
    }
}

impl LinearOperator for SecondMomentOperator {
    fn dim(&self) -> usize {
        self.posteriors[0].dim()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        let terms: Vec<Vec<f64>> = self
            .posteriors
            .par_iter()
            .map(|p| {
                let mut out = p.covariance.apply(x)?;
                axpy(dot(&p.mean, x), &p.mean, &mut out);
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let mut sum = vec![0.0; x.len()];
        for term in &terms {
            axpy(1.0, term, &mut sum);
        }
        Ok(sum)
    }
}
impl SymmetricOperator for SecondMomentOperator {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEstimate {
    pub value: f64,
    /// Zero for exact traces.
    pub std_error: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMode {
    /// Exact when every implicit covariance has dimension <= 4096,
    /// Hutchinson with 64 probes otherwise.
    Auto,
    Exact,
    Hutchinson {
        probes: usize,
        seed: u64,
    },
}

/// `trace(S) = sum_t trace(p_t) + |m_t|^2`.
pub fn trace_estimate(s: &SecondMomentOperator) -> Result<TraceEstimate> {
    trace_estimate_with(s, TraceMode::Auto)
}

pub fn trace_estimate_with(s: &SecondMomentOperator, mode: TraceMode) -> Result<TraceEstimate> {
    let mean_part: f64 = s.posteriors.iter().map(|p| dot(&p.mean, &p.mean)).sum();
    let n = s.dim();
    let has_implicit = s
        .posteriors
        .iter()
        .any(|p| matches!(p.covariance, Covariance::Implicit(_)));
    let mode = match mode {
        TraceMode::Auto if has_implicit && n > EXACT_TRACE_LIMIT => TraceMode::Hutchinson {
            probes: HUTCHINSON_PROBES,
            seed: 0,
        },
        TraceMode::Auto => TraceMode::Exact,
        m => m,
    };

    match mode {
        TraceMode::Exact | TraceMode::Auto => {
            let mut cov_part = 0.0;
            for p in &s.posteriors {
                cov_part += covariance_trace(&p.covariance)?;
            }
            Ok(TraceEstimate {
                value: mean_part + cov_part,
                std_error: 0.0,
                exact: true,
            })
        }
        TraceMode::Hutchinson { probes, seed } => {
            if probes < 2 {
                return Err(Error::InvalidArgument(
                    "Hutchinson estimator needs at least 2 probes".into(),
                ));
            }
            // Exact parts stay exact; only implicit covariances are sampled.
            let mut exact_part = 0.0;
            let implicit: Vec<&Covariance> = s
                .posteriors
                .iter()
                .map(|p| &p.covariance)
                .filter(|c| {
                    if matches!(c, Covariance::Implicit(_)) {
                        true
                    } else {
                        exact_part += covariance_trace(c).unwrap_or(0.0);
                        false
                    }
                })
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let probe_vecs: Vec<Vec<f64>> = (0..probes)
                .map(|_| {
                    (0..n)
                        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                        .collect()
                })
                .collect();
            let samples: Vec<f64> = probe_vecs
                .par_iter()
                .map(|z| {
                    let mut acc = 0.0;
                    for c in &implicit {
                        acc += dot(z, &c.apply(z)?);
                    }
                    Ok(acc)
                })
                .collect::<Result<_>>()?;
            let mean = samples.iter().sum::<f64>() / probes as f64;
            let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (probes - 1) as f64;
            Ok(TraceEstimate {
                value: mean_part + exact_part + mean,
                std_error: (var / probes as f64).sqrt(),
                exact: implicit.is_empty(),
            })
        }
    }
}

fn covariance_trace(c: &Covariance) -> Result<f64> {
    match c {
        Covariance::Zero { .. } => Ok(0.0),
        Covariance::Dense(m) => Ok(m.trace()),
        Covariance::Implicit(_) => {
            let n = c.dim();
            let diag: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    Ok(c.apply(&e)?[i])
                })
                .collect::<Result<_>>()?;
            Ok(diag.iter().sum())
        }
    }
}
