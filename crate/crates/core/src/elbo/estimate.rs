use nalgebra::DMatrix;

use super::{Decoder, Encoder};
use crate::deform::FrameSeq;
use crate::error::{Error, Result};
use crate::gaussian::{cholesky_with_jitter, symmetrize, Gaussian};
use crate::lgssm::{kalman_filter, LgssmParams, ObsSeq};
use crate::rng::{stream, stream_rng};

/// Monte-Carlo ELBO with its standard error and per-term breakdown.
/// `value` is exactly `reconstruction + latent + entropy`.
#[derive(Debug, Clone, Copy)]
pub struct ElboEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    /// Mean of sum_t log p_theta(y_t | y_0, x~_t).
    pub reconstruction: f64,
    /// Mean of log p_gamma(x~_{1:T}).
    pub latent: f64,
    /// Mean of -sum_t log q_phi(x~_t | y_0, y_t).
    pub entropy: f64,
}

/// Estimate the evidence lower bound by sampling codes x~ from the encoder.
/// Deterministic for a fixed seed; the standard error is the sample standard
/// deviation of the per-sample totals divided by sqrt(n) (infinite for a
/// single sample).
pub fn elbo_estimate<E: Encoder, D: Decoder>(
    encoder: &E,
    decoder: &D,
    lgssm: &LgssmParams,
    seq: &FrameSeq,
    n_samples: usize,
    seed: u64,
) -> Result<ElboEstimate> {
    if n_samples == 0 {
        return Err(Error::Precondition("n_samples must be at least 1".into()));
    }
    if seq.is_empty() {
        return Err(Error::Precondition("frame sequence is empty".into()));
    }
    if encoder.code_dim() != lgssm.obs_dim() {
        return Err(Error::Dim("encoder code dimension does not match the temporal model".into()));
    }

    let mut rng = stream_rng(seed, stream::ELBO);
    let features = decoder.feature_extract(&seq.reference);
    let t_len = seq.len();
    let d_x = encoder.code_dim();

    // Per-step encoder distributions and flattened targets are fixed across
    // samples.
    let mut encoded = Vec::with_capacity(t_len);
    let mut targets = Vec::with_capacity(t_len);
    for frame in &seq.frames {
        encoded.push(encoder.encode(&seq.reference, frame)?);
        targets.push(frame.to_vector());
    }

    let mut totals = Vec::with_capacity(n_samples);
    let mut sum_rec = 0.0;
    let mut sum_lat = 0.0;
    let mut sum_ent = 0.0;
    for _ in 0..n_samples {
        let mut rec = 0.0;
        let mut ent = 0.0;
        let mut codes = DMatrix::zeros(t_len, d_x);
        for t in 0..t_len {
            let x = encoded[t].sample(&mut rng)?;
            ent -= encoded[t].log_density(&x)?;
            let lik = decoder.decode(&x, &features)?;
            rec += lik.log_density(&targets[t])?;
            codes.row_mut(t).copy_from(&x.transpose());
        }
        let lat = latent_term(lgssm, &ObsSeq::fully_observed(codes)?)?;
        for (name, term) in [("reconstruction", rec), ("latent", lat), ("entropy", ent)] {
            if !term.is_finite() {
                return Err(Error::Numeric(format!("{name} term is not finite ({term})")));
            }
        }
        sum_rec += rec;
        sum_lat += lat;
        sum_ent += ent;
        totals.push(rec + lat + ent);
    }

    let n = n_samples as f64;
    let reconstruction = sum_rec / n;
    let latent = sum_lat / n;
    let entropy = sum_ent / n;
    let mean_total: f64 = totals.iter().sum::<f64>() / n;
    let std_error = if n_samples > 1 {
        let var =
            totals.iter().map(|v| (v - mean_total) * (v - mean_total)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        f64::INFINITY
    };

    Ok(ElboEstimate {
        value: reconstruction + latent + entropy,
        std_error,
        n_samples,
        reconstruction,
        latent,
        entropy,
    })
}

/// Inner latent expectation of the bound. The ratio collapses analytically:
/// E_{p(z|x)}[log p(x, z) - log p(z | x)] = log p(x), so this is the Kalman
/// filter log-likelihood of the (fully observed) code sequence.
pub fn latent_term(lgssm: &LgssmParams, x_samples: &ObsSeq) -> Result<f64> {
    if x_samples.observed_count() != x_samples.len() {
        return Err(Error::Precondition("latent term requires a fully observed sequence".into()));
    }
    Ok(kalman_filter(lgssm, x_samples)?.loglik)
}

/// Monte-Carlo cross-check of the analytic collapse: samples z~ from the
/// exact posterior by backward (FFBS) sampling and averages
/// log p(x, z~) - log p(z~ | x). Returns (estimate, standard error).
pub fn latent_term_mc(
    lgssm: &LgssmParams,
    x_samples: &ObsSeq,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_samples < 2 {
        return Err(Error::Precondition("the cross-check needs at least 2 samples".into()));
    }
    if x_samples.observed_count() != x_samples.len() {
        return Err(Error::Precondition("latent term requires a fully observed sequence".into()));
    }
    let filt = kalman_filter(lgssm, x_samples)?;
    let t_len = x_samples.len();

    // Backward kernels p(z_t | z_{t+1}, x_{1:t}) shared by sampling and
    // density evaluation; index t_len - 1 down to 0 plus the initial state.
    struct Kernel {
        gain: DMatrix<f64>,
        cov: DMatrix<f64>,
    }
    let kernel = |cov_filt: &DMatrix<f64>, pred: &Gaussian| -> Result<Kernel> {
        let (chol, _) = cholesky_with_jitter(&pred.cov)?;
        let gain = chol.solve(&(&lgssm.a * cov_filt)).transpose();
        let cov = symmetrize(&(cov_filt - &gain * &pred.cov * gain.transpose()));
        Ok(Kernel { gain, cov })
    };

    let mut kernels = Vec::with_capacity(t_len.saturating_sub(1));
    for t in 0..t_len - 1 {
        kernels.push(kernel(&filt.filtered[t].cov, &filt.predicted[t + 1])?);
    }
    let initial_kernel = kernel(&lgssm.sigma0, &filt.predicted[0])?;
    let prior = Gaussian::new(lgssm.mu0.clone(), lgssm.sigma0.clone())?;

    let mut rng = stream_rng(seed, stream::LATENT_MC);
    let mut values = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let last = filt.filtered.last().expect("non-empty filter");
        let mut z = vec![last.sample(&mut rng)?];
        let mut log_q = last.log_density(z.last().unwrap())?;
        for t in (0..t_len - 1).rev() {
            let k = &kernels[t];
            let mean = &filt.filtered[t].mean
                + &k.gain * (z.last().unwrap() - &filt.predicted[t + 1].mean);
            let cond = Gaussian::new(mean, k.cov.clone())?;
            let sample = cond.sample(&mut rng)?;
            log_q += cond.log_density(&sample)?;
            z.push(sample);
        }
        let mean0 = &lgssm.mu0
            + &initial_kernel.gain * (z.last().unwrap() - &filt.predicted[0].mean);
        let cond0 = Gaussian::new(mean0, initial_kernel.cov.clone())?;
        let z0 = cond0.sample(&mut rng)?;
        log_q += cond0.log_density(&z0)?;

        z.reverse(); // now z[0] = z_1 .. z[t_len-1] = z_T
        let mut log_joint = prior.log_density(&z0)?;
        let mut prev = z0;
        for (t, zt) in z.iter().enumerate() {
            let trans = Gaussian::new(&lgssm.a * &prev, lgssm.q.clone())?;
            log_joint += trans.log_density(zt)?;
            let obs = Gaussian::new(&lgssm.c * zt, lgssm.r.clone())?;
            log_joint += obs.log_density(&x_samples.value(t))?;
            prev = zt.clone();
        }
        values.push(log_joint - log_q);
    }

    let n = n_samples as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lgssm::simulate;
    use nalgebra::DVector;

    fn small_model() -> LgssmParams {
        LgssmParams::new(
            DMatrix::from_row_slice(2, 2, &[0.8, 0.2, -0.1, 0.7]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.6]),
            DMatrix::from_row_slice(1, 2, &[1.0, -0.4]),
            DMatrix::from_element(1, 1, 0.3),
            DVector::from_vec(vec![0.1, -0.3]),
            DMatrix::identity(2, 2),
        )
        .unwrap()
    }

    #[test]
    fn analytic_latent_term_is_the_filter_loglik_bit_for_bit() {
        let m = small_model();
        let (_, x) = simulate(&m, 6, 21).unwrap();
        let obs = ObsSeq::fully_observed(x).unwrap();
        let lt = latent_term(&m, &obs).unwrap();
        let direct = kalman_filter(&m, &obs).unwrap().loglik;
        assert_eq!(lt, direct);
    }

    #[test]
    fn monte_carlo_mode_agrees_with_the_analytic_collapse() {
        // The integrand log p(x, z~) - log p(z~ | x) equals log p(x) for
        // every z~, so the sample standard error collapses to float noise;
        // keep an absolute floor in the band for that reason.
        let m = small_model();
        let (_, x) = simulate(&m, 5, 33).unwrap();
        let obs = ObsSeq::fully_observed(x).unwrap();
        let exact = latent_term(&m, &obs).unwrap();
        let (mc, se) = latent_term_mc(&m, &obs, 10_000, 7).unwrap();
        let band = (4.0 * se).max(1e-9 * exact.abs());
        assert!((mc - exact).abs() <= band, "mc {mc} vs exact {exact}, se {se}");
    }

    #[test]
    fn near_deterministic_limit_stays_finite() {
        // Q = R = 1e-12 I with data on the deterministic trajectory: the
        // log-densities are near-delta spikes but finite.
        let m = LgssmParams::new(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1e-12),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1e-12),
            DVector::from_element(1, 2.0),
            DMatrix::from_element(1, 1, 1e-12),
        )
        .unwrap();
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 0.5, 0.25]);
        let lt = latent_term(&m, &ObsSeq::fully_observed(x).unwrap()).unwrap();
        assert!(lt.is_finite());
        assert!(lt > 0.0); // sharp densities give large positive log values
    }

    #[test]
    fn missing_steps_are_rejected() {
        let m = small_model();
        let obs = ObsSeq::new(DMatrix::zeros(3, 1), vec![true, false, true], 0).unwrap();
        assert!(latent_term(&m, &obs).is_err());
    }
}
