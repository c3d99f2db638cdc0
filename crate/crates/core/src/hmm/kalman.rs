use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::GaussianPosterior;
use crate::error::{check_len, Error, Result};

const MAX_STATE: usize = 64;
const MAX_STEPS: usize = 200;

/// Dense linear-Gaussian state-space model:
///
/// ```text
/// x_1 ~ N(m_1, P_1)
/// x_t = A_t x_{t-1} + v_t,   v_t ~ N(0, Q_t)     (t >= 2)
/// y_t = H_t x_t + w_t,       w_t ~ N(0, R_t)
/// ```
///
/// `transitions[t]` and `process_covs[t]` are ignored for `t = 0`.
#[derive(Debug, Clone)]
pub struct DenseLgss {
    pub initial_mean: DVector<f64>,
    pub initial_cov: DMatrix<f64>,
    pub transitions: Vec<DMatrix<f64>>,
    pub process_covs: Vec<DMatrix<f64>>,
    pub obs_mats: Vec<DMatrix<f64>>,
    pub noise_covs: Vec<DMatrix<f64>>,
}

impl DenseLgss {
    pub fn steps(&self) -> usize {
        self.obs_mats.len()
    }

    pub fn state_dim(&self) -> usize {
        self.initial_mean.len()
    }
}

fn check_psd(m: &DMatrix<f64>, step: usize) -> Result<()> {
    let sym = (m + m.transpose()) * 0.5;
    let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
    if min_eig < -1e-10 * m.amax().max(1.0) {
        return Err(Error::NotPsd { step, min_eig });
    }
    Ok(())
}

fn spd_inverse(m: &DMatrix<f64>, step: usize) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    match sym.clone().cholesky() {
        Some(c) => Ok(c.inverse()),
        None => Err(Error::NotPsd {
            step,
            min_eig: SymmetricEigen::new(sym).eigenvalues.min(),
        }),
    }
}

/// Forward Kalman filter followed by the Rauch-Tung-Striebel smoother.
/// Returns smoothed means and dense covariances for every step.
pub fn kalman_rts_oracle(
    model: &DenseLgss,
    observations: &[DVector<f64>],
) -> Result<Vec<GaussianPosterior>> {
    let n = model.state_dim();
    let steps = model.steps();
    if n > MAX_STATE || steps > MAX_STEPS {
        return Err(Error::InvalidArgument(format!(
            "dense oracle limited to n <= {MAX_STATE}, T <= {MAX_STEPS}"
        )));
    }
    check_len(steps, observations.len())?;
    check_len(steps, model.noise_covs.len())?;
    check_len(steps, model.transitions.len())?;
    check_len(steps, model.process_covs.len())?;
    for m in model
        .process_covs
        .iter()
        .skip(1)
        .chain(model.noise_covs.iter())
        .chain([&model.initial_cov])
    {
        check_psd(m, 0)?;
    }

    let eye = DMatrix::<f64>::identity(n, n);
    let mut pred_means = Vec::with_capacity(steps);
    let mut pred_covs = Vec::with_capacity(steps);
    let mut filt_means: Vec<DVector<f64>> = Vec::with_capacity(steps);
    let mut filt_covs: Vec<DMatrix<f64>> = Vec::with_capacity(steps);

    for t in 0..steps {
        let (m_pred, p_pred) = if t == 0 {
            (model.initial_mean.clone(), model.initial_cov.clone())
        } else {
            let a = &model.transitions[t];
            (
                a * &filt_means[t - 1],
                a * &filt_covs[t - 1] * a.transpose() + &model.process_covs[t],
            )
        };
        check_psd(&p_pred, t)?;

        let h = &model.obs_mats[t];
        let r = &model.noise_covs[t];
        check_len(n, h.ncols())?;
        check_len(h.nrows(), observations[t].len())?;
        let innov_cov = h * &p_pred * h.transpose() + r;
        let gain = &p_pred * h.transpose() * spd_inverse(&innov_cov, t)?;
        let m = &m_pred + &gain * (&observations[t] - h * &m_pred);
        let ikh = &eye - &gain * h;
        let p = &ikh * &p_pred * ikh.transpose() + &gain * r * gain.transpose();

        pred_means.push(m_pred);
        pred_covs.push(p_pred);
        filt_means.push(m);
        filt_covs.push((&p + p.transpose()) * 0.5);
    }

    let mut means = filt_means.clone();
    let mut covs = filt_covs.clone();
    for t in (0..steps.saturating_sub(1)).rev() {
        let a = &model.transitions[t + 1];
        let smoother_gain = &filt_covs[t] * a.transpose() * spd_inverse(&pred_covs[t + 1], t + 1)?;
        means[t] = &filt_means[t] + &smoother_gain * (&means[t + 1] - &pred_means[t + 1]);
        let p = &filt_covs[t]
            + &smoother_gain * (&covs[t + 1] - &pred_covs[t + 1]) * smoother_gain.transpose();
        covs[t] = (&p + p.transpose()) * 0.5;
    }

    means
        .into_iter()
        .zip(covs)
        .map(|(m, p)| GaussianPosterior::dense(m.data.into(), p))
        .collect()
}
