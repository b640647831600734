use nalgebra::DMatrix;

use super::{FilterResult, LgssmParams, ObsSeq};
use crate::error::{Error, Result};
use crate::gaussian::{chol_log_det, cholesky_with_jitter, symmetrize, Gaussian, LN_2PI};

/// Forward Kalman recursion with missing-data support.
///
/// At a missing step the update is skipped (filtered = predicted) and the
/// per-step log-likelihood contribution is zero, so `loglik` is the exact
/// log marginal density of precisely the observed entries. Covariance
/// updates use the Joseph form and are re-symmetrized every step.
pub fn kalman_filter(params: &LgssmParams, obs: &ObsSeq) -> Result<FilterResult> {
    let d_z = params.state_dim();
    let d_x = params.obs_dim();
    if obs.obs_dim() != d_x {
        return Err(Error::Dim(format!(
            "observations have dimension {} but the model expects {}",
            obs.obs_dim(),
            d_x
        )));
    }
    let t_len = obs.len();
    if t_len == 0 {
        return Err(Error::Precondition("observation sequence is empty".into()));
    }

    let mut predicted = Vec::with_capacity(t_len);
    let mut filtered = Vec::with_capacity(t_len);
    let mut per_step = Vec::with_capacity(t_len);

    let mut mean_pred = &params.a * &params.mu0;
    let mut cov_pred = symmetrize(&(&params.a * &params.sigma0 * params.a.transpose() + &params.q));
    let identity = DMatrix::<f64>::identity(d_z, d_z);

    for t in 0..t_len {
        predicted.push(Gaussian { mean: mean_pred.clone(), cov: cov_pred.clone() });

        let (mean_filt, cov_filt, step_ll) = if obs.is_observed(t) {
            let x = obs.value(t);
            let innovation = &x - &params.c * &mean_pred;
            let s = &params.c * &cov_pred * params.c.transpose() + &params.r;
            let (chol, _) = cholesky_with_jitter(&s).map_err(|_| {
                Error::Numeric(format!("innovation covariance not positive definite at step {t}"))
            })?;
            let quad = innovation.dot(&chol.solve(&innovation));
            let ll = -0.5 * (d_x as f64 * LN_2PI + chol_log_det(&chol) + quad);

            // K = P C^T S^{-1}, computed by solving S K^T = C P.
            let gain = chol.solve(&(&params.c * &cov_pred)).transpose();
            let mean = &mean_pred + &gain * innovation;
            let i_kc = &identity - &gain * &params.c;
            let cov = &i_kc * &cov_pred * i_kc.transpose() + &gain * &params.r * gain.transpose();
            (mean, symmetrize(&cov), ll)
        } else {
            (mean_pred.clone(), cov_pred.clone(), 0.0)
        };

        per_step.push(step_ll);
        filtered.push(Gaussian { mean: mean_filt.clone(), cov: cov_filt.clone() });

        if t + 1 < t_len {
            mean_pred = &params.a * mean_filt;
            cov_pred = symmetrize(&(&params.a * cov_filt * params.a.transpose() + &params.q));
        }
    }

    let loglik = per_step.iter().sum();
    Ok(FilterResult { predicted, filtered, loglik, per_step_loglik: per_step })
}
