use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{kalman_filter, rts_smooth, LgssmParams, ObsSeq};
use crate::error::{Error, Result};
use crate::gaussian::{psd_sqrt, symmetrize, Gaussian, GaussianSeq};
use crate::rng::{stream, stream_rng};

/// Predictive distributions over both future states and future observations.
#[derive(Debug, Clone)]
pub struct ForecastResult {
    /// p(z_{T+j} | x_{1:T}) for j = 1..k.
    pub states: GaussianSeq,
    /// p(x_{T+j} | x_{1:T}) for j = 1..k.
    pub observations: GaussianSeq,
}

/// Propagate `last_filtered` forward `k` steps without observation updates.
pub fn forecast(params: &LgssmParams, last_filtered: &Gaussian, k: usize) -> Result<ForecastResult> {
    if k == 0 {
        return Err(Error::Precondition("forecast horizon must be at least 1".into()));
    }
    if last_filtered.dim() != params.state_dim() {
        return Err(Error::Dim(format!(
            "filtered state has dimension {} but the model expects {}",
            last_filtered.dim(),
            params.state_dim()
        )));
    }
    let mut states = Vec::with_capacity(k);
    let mut observations = Vec::with_capacity(k);
    let mut mean = last_filtered.mean.clone();
    let mut cov = last_filtered.cov.clone();
    for _ in 0..k {
        mean = &params.a * mean;
        cov = symmetrize(&(&params.a * cov * params.a.transpose() + &params.q));
        observations.push(Gaussian {
            mean: &params.c * &mean,
            cov: symmetrize(&(&params.c * &cov * params.c.transpose() + &params.r)),
        });
        states.push(Gaussian { mean: mean.clone(), cov: cov.clone() });
    }
    Ok(ForecastResult { states, observations })
}

/// Smoothed predictive distribution over x_t for every step, observed or
/// missing: mean C m_{t|T}, covariance C P_{t|T} Cᵀ + R.
pub fn impute(params: &LgssmParams, obs: &ObsSeq) -> Result<GaussianSeq> {
    if obs.observed_count() == 0 {
        return Err(Error::Precondition("imputation requires at least one observed step".into()));
    }
    let filt = kalman_filter(params, obs)?;
    let sm = rts_smooth(params, &filt)?;
    Ok(sm
        .smoothed
        .iter()
        .map(|g| Gaussian {
            mean: &params.c * &g.mean,
            cov: symmetrize(&(&params.c * &g.cov * params.c.transpose() + &params.r)),
        })
        .collect())
}

/// Ancestral sampling of the model. Returns (latents z_{1:T}, observations
/// x_{1:T}) as T x d_z and T x d_x matrices; deterministic for a fixed seed.
pub fn simulate(params: &LgssmParams, t_len: usize, seed: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if t_len == 0 {
        return Err(Error::Precondition("simulation length must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, stream::SIMULATE);
    simulate_with_rng(params, t_len, &mut rng, None)
}

/// Simulation core shared with the synthetic harness. `shift` optionally
/// replaces the transition matrix from a given step onward.
pub(crate) fn simulate_with_rng<R: Rng + ?Sized>(
    params: &LgssmParams,
    t_len: usize,
    rng: &mut R,
    shift: Option<(usize, &DMatrix<f64>)>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d_z = params.state_dim();
    let d_x = params.obs_dim();
    let root_s0 = psd_sqrt(&params.sigma0)?;
    let root_q = psd_sqrt(&params.q)?;
    let root_r = psd_sqrt(&params.r)?;

    let mut latents = DMatrix::zeros(t_len, d_z);
    let mut observations = DMatrix::zeros(t_len, d_x);

    let mut z = &params.mu0 + &root_s0 * standard_normal_vector(d_z, rng);
    for t in 0..t_len {
        let a_t = match shift {
            Some((at, new_a)) if t >= at => new_a,
            _ => &params.a,
        };
        z = a_t * z + &root_q * standard_normal_vector(d_z, rng);
        let x = &params.c * &z + &root_r * standard_normal_vector(d_x, rng);
        latents.row_mut(t).copy_from(&z.transpose());
        observations.row_mut(t).copy_from(&x.transpose());
    }
    Ok((latents, observations))
}

fn standard_normal_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}
