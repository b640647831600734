use super::{FilterResult, LgssmParams, SmoothResult};
use crate::error::{Error, Result};
use crate::gaussian::{cholesky_with_jitter, symmetrize, Gaussian};

/// Backward Rauch-Tung-Striebel pass over a completed filter result.
///
/// Emits the smoothed marginals, the pairwise cross-covariances
/// Cov(z_{t+1}, z_t | x_{1:T}) = P_{t+1|T} G_tᵀ obtained from the smoother
/// gain G_t, and the smoothed initial state z_0.
pub fn rts_smooth(params: &LgssmParams, filt: &FilterResult) -> Result<SmoothResult> {
    let t_len = filt.filtered.len();
    if t_len == 0 || filt.predicted.len() != t_len {
        return Err(Error::Precondition("filter result is empty or inconsistent".into()));
    }
    if filt.filtered[0].dim() != params.state_dim() {
        return Err(Error::Dim("filter result does not match the model dimension".into()));
    }

    let mut smoothed: Vec<Gaussian> = filt.filtered.clone();
    let mut pairwise = vec![nalgebra::DMatrix::<f64>::zeros(0, 0); t_len.saturating_sub(1)];

    for t in (0..t_len - 1).rev() {
        let gain = smoother_gain(params, &filt.filtered[t].cov, &filt.predicted[t + 1].cov, t + 1)?;
        let dm = &smoothed[t + 1].mean - &filt.predicted[t + 1].mean;
        let dp = &smoothed[t + 1].cov - &filt.predicted[t + 1].cov;
        smoothed[t] = Gaussian {
            mean: &filt.filtered[t].mean + &gain * dm,
            cov: symmetrize(&(&filt.filtered[t].cov + &gain * dp * gain.transpose())),
        };
        pairwise[t] = &smoothed[t + 1].cov * gain.transpose();
    }

    // One more backward step onto the pre-observation state z_0, whose
    // "filtered" belief is the prior N(mu0, Sigma0).
    let gain0 = smoother_gain(params, &params.sigma0, &filt.predicted[0].cov, 0)?;
    let dm = &smoothed[0].mean - &filt.predicted[0].mean;
    let dp = &smoothed[0].cov - &filt.predicted[0].cov;
    let initial = Gaussian {
        mean: &params.mu0 + &gain0 * dm,
        cov: symmetrize(&(&params.sigma0 + &gain0 * dp * gain0.transpose())),
    };
    let initial_cross = &smoothed[0].cov * gain0.transpose();

    Ok(SmoothResult { smoothed, pairwise_cov: pairwise, initial, initial_cross })
}

/// G = P_filt Aᵀ P_pred⁻¹ via Cholesky (with jitter escalation) of the
/// predicted covariance; reports the offending step on failure.
fn smoother_gain(
    params: &LgssmParams,
    cov_filt: &nalgebra::DMatrix<f64>,
    cov_pred_next: &nalgebra::DMatrix<f64>,
    next_step: usize,
) -> Result<nalgebra::DMatrix<f64>> {
    let (chol, _) = cholesky_with_jitter(cov_pred_next).map_err(|_| {
        Error::Numeric(format!(
            "singular predicted covariance at step {next_step} while forming the smoother gain"
        ))
    })?;
    Ok(chol.solve(&(&params.a * cov_filt)).transpose())
}
