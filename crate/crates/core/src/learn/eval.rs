use rand::Rng;

use crate::error::{Error, Result};
use crate::gaussian::psd_sqrt;
use crate::lgssm::{forecast, kalman_filter, LgssmParams, ObsSeq};
use crate::rng::{stream, stream_rng};

#[derive(Debug, Clone, Copy)]
pub struct ForecastEval {
    /// Exact log-density of the future block given the past, in nats.
    pub loglik: f64,
    /// Root-mean-square error of the deterministic predictive means against
    /// the observed future rows.
    pub rmse: f64,
}

/// Score a forecast: the log-likelihood is the exact joint predictive
/// density log p(x_future | x_past), obtained by the chain rule as the
/// difference of two filter passes (the future block acquires no new
/// parameters, only conditioning); the RMSE compares the no-update
/// predictive means with the future observations.
pub fn evaluate_forecast(
    params: &LgssmParams,
    obs_past: &ObsSeq,
    obs_future: &ObsSeq,
) -> Result<ForecastEval> {
    if obs_future.is_empty() {
        return Err(Error::Precondition("future block must contain at least one step".into()));
    }
    let past_res = kalman_filter(params, obs_past)?;
    let joint = obs_past.concat(obs_future)?;
    let joint_res = kalman_filter(params, &joint)?;
    let loglik = joint_res.loglik - past_res.loglik;

    let last = past_res.filtered.last().expect("non-empty filter result");
    let fc = forecast(params, last, obs_future.len())?;
    let mut sq = 0.0;
    let mut count = 0usize;
    for t in 0..obs_future.len() {
        if !obs_future.is_observed(t) {
            continue;
        }
        let diff = obs_future.value(t) - &fc.observations[t].mean;
        sq += diff.norm_squared();
        count += diff.len();
    }
    if count == 0 {
        return Err(Error::Precondition("future block has no observed steps".into()));
    }
    Ok(ForecastEval { loglik, rmse: (sq / count as f64).sqrt() })
}

/// Monte-Carlo RMSE variant: draws `n_paths` sample paths from the forecast
/// distribution and reports the mean over paths of the per-path RMSE,
/// together with the same exact log-likelihood.
pub fn evaluate_forecast_mc(
    params: &LgssmParams,
    obs_past: &ObsSeq,
    obs_future: &ObsSeq,
    n_paths: usize,
    seed: u64,
) -> Result<ForecastEval> {
    if n_paths == 0 {
        return Err(Error::Precondition("n_paths must be at least 1".into()));
    }
    let base = evaluate_forecast(params, obs_past, obs_future)?;
    let past_res = kalman_filter(params, obs_past)?;
    let last = past_res.filtered.last().expect("non-empty filter result");

    let root_start = psd_sqrt(&last.cov)?;
    let root_q = psd_sqrt(&params.q)?;
    let root_r = psd_sqrt(&params.r)?;
    let mut rng = stream_rng(seed, stream::FORECAST_MC);

    let h = obs_future.len();
    let mut rmse_sum = 0.0;
    for _ in 0..n_paths {
        let noise = nalgebra::DVector::from_fn(params.state_dim(), |_, _| {
            rng.sample(rand_distr::StandardNormal)
        });
        let mut z = &last.mean + &root_start * noise;
        let mut sq = 0.0;
        let mut count = 0usize;
        for t in 0..h {
            let wz = nalgebra::DVector::from_fn(params.state_dim(), |_, _| {
                rng.sample(rand_distr::StandardNormal)
            });
            let vx = nalgebra::DVector::from_fn(params.obs_dim(), |_, _| {
                rng.sample(rand_distr::StandardNormal)
            });
            z = &params.a * z + &root_q * wz;
            let x = &params.c * &z + &root_r * vx;
            if obs_future.is_observed(t) {
                let diff = obs_future.value(t) - x;
                sq += diff.norm_squared();
                count += diff.len();
            }
        }
        rmse_sum += (sq / count as f64).sqrt();
    }
    Ok(ForecastEval { loglik: base.loglik, rmse: rmse_sum / n_paths as f64 })
}
