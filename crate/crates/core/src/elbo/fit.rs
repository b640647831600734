use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::standin::{LinearGaussianEncoder, LinearStandIn};
use crate::deform::FrameSeq;
use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::learn::{AdamConfig, AdamState, ParamPacking, ParamVector};
use crate::lgssm::{kalman_filter, LgssmParams, ObsSeq};
use crate::rng::{stream, stream_rng};

#[derive(Debug, Clone)]
pub struct JointFitConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    /// Monte-Carlo samples per ELBO evaluation during fitting.
    pub n_samples: usize,
    /// Central-difference step for the stand-in gradients.
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for JointFitConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iters: 50,
            n_samples: 1,
            fd_step: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JointFitResult {
    pub encoder: LinearGaussianEncoder,
    pub standin: LinearStandIn,
    pub lgssm: LgssmParams,
    /// Objective (mean reparameterized ELBO) per iteration.
    pub trace: Vec<f64>,
}

/// Simultaneous gradient ascent on the ELBO for the encoder parameters phi,
/// the stand-in decoder parameters theta = (W, R_y), and the temporal model
/// gamma, restricted to the linear-Gaussian stand-in family.
///
/// Sampling is reparameterized with common random numbers per iteration, so
/// the per-iteration objective is a deterministic smooth function of the
/// parameters and central finite differences give its exact gradient up to
/// truncation error.
pub fn joint_fit(
    encoder: &LinearGaussianEncoder,
    standin: &LinearStandIn,
    lgssm: &LgssmParams,
    dataset: &[FrameSeq],
    cfg: &JointFitConfig,
) -> Result<JointFitResult> {
    if dataset.is_empty() {
        return Err(Error::Precondition("dataset is empty".into()));
    }
    if !(cfg.learning_rate > 0.0) || cfg.n_samples == 0 || !(cfg.fd_step > 0.0) {
        return Err(Error::Invalid("learning rate, n_samples, and fd_step must be positive".into()));
    }

    let layout = Layout::new(standin.code_dim(), standin.obs_dim(), lgssm.state_dim());
    let mut packed = layout.pack(encoder, standin, lgssm)?;
    let mut adam = AdamState::new(packed.len());
    let adam_cfg = AdamConfig {
        learning_rate: cfg.learning_rate,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        epsilon: cfg.epsilon,
    };

    let mut rng = stream_rng(cfg.seed, stream::ELBO);
    let mut trace = Vec::with_capacity(cfg.max_iters);
    for iter in 0..cfg.max_iters {
        // Fresh common random numbers for this iteration.
        let draws = draw_noise(dataset, cfg.n_samples, layout.d_x, &mut rng);
        let objective = layout.objective(&packed, standin.frame_shape, dataset, &draws)?;
        if !objective.is_finite() {
            return Err(Error::Diverged { iter, reason: format!("objective became {objective}") });
        }
        trace.push(objective);

        let mut grad = DVector::zeros(packed.len());
        for i in 0..packed.len() {
            let mut plus = packed.clone();
            let mut minus = packed.clone();
            plus[i] += cfg.fd_step;
            minus[i] -= cfg.fd_step;
            let f_plus = layout.objective(&plus, standin.frame_shape, dataset, &draws)?;
            let f_minus = layout.objective(&minus, standin.frame_shape, dataset, &draws)?;
            grad[i] = (f_plus - f_minus) / (2.0 * cfg.fd_step);
        }
        adam.ascend(&mut packed, &grad, &adam_cfg);
    }

    let (encoder, standin, lgssm) = layout.unpack(&packed, standin.frame_shape)?;
    Ok(JointFitResult { encoder, standin, lgssm, trace })
}

/// Flat layout: encoder map | encoder bias | encoder factor | W | R_y factor
/// | packed temporal parameters. Factors are lower triangular with
/// log-parameterized diagonals, matching the learner's packing.
struct Layout {
    d_x: usize,
    d_y: usize,
    gamma: ParamPacking,
}

impl Layout {
    fn new(d_x: usize, d_y: usize, d_z: usize) -> Self {
        Self { d_x, d_y, gamma: ParamPacking::new(d_z, d_x) }
    }

    fn map_at(&self) -> usize {
        0
    }
    fn bias_at(&self) -> usize {
        self.map_at() + self.d_x * self.d_y
    }
    fn enc_factor_at(&self) -> usize {
        self.bias_at() + self.d_x
    }
    fn w_at(&self) -> usize {
        self.enc_factor_at() + tri(self.d_x)
    }
    fn ry_factor_at(&self) -> usize {
        self.w_at() + self.d_y * self.d_x
    }
    fn gamma_at(&self) -> usize {
        self.ry_factor_at() + tri(self.d_y)
    }
    fn len(&self) -> usize {
        self.gamma_at() + self.gamma.len()
    }

    fn pack(
        &self,
        encoder: &LinearGaussianEncoder,
        standin: &LinearStandIn,
        lgssm: &LgssmParams,
    ) -> Result<DVector<f64>> {
        if encoder.code_dim_internal() != self.d_x || encoder.map.ncols() != self.d_y {
            return Err(Error::Dim("encoder shape does not match the stand-in".into()));
        }
        if lgssm.obs_dim() != self.d_x {
            return Err(Error::Dim("temporal model does not match the stand-in code dimension".into()));
        }
        let mut out = DVector::zeros(self.len());
        let mut k = self.map_at();
        for r in 0..self.d_x {
            for c in 0..self.d_y {
                out[k] = encoder.map[(r, c)];
                k += 1;
            }
        }
        for i in 0..self.d_x {
            out[self.bias_at() + i] = encoder.bias[i];
        }
        crate::learn::pack_write_factor(&encoder.cov, &mut out, self.enc_factor_at())?;
        let mut k = self.w_at();
        for r in 0..self.d_y {
            for c in 0..self.d_x {
                out[k] = standin.w[(r, c)];
                k += 1;
            }
        }
        crate::learn::pack_write_factor(&standin.r_y, &mut out, self.ry_factor_at())?;
        let gamma = ParamVector::from_lgssm(lgssm)?;
        for i in 0..self.gamma.len() {
            out[self.gamma_at() + i] = gamma.data()[i];
        }
        Ok(out)
    }

    fn unpack(
        &self,
        packed: &DVector<f64>,
        frame_shape: (usize, usize),
    ) -> Result<(LinearGaussianEncoder, LinearStandIn, LgssmParams)> {
        let mut map = DMatrix::zeros(self.d_x, self.d_y);
        let mut k = self.map_at();
        for r in 0..self.d_x {
            for c in 0..self.d_y {
                map[(r, c)] = packed[k];
                k += 1;
            }
        }
        let bias = DVector::from_fn(self.d_x, |i, _| packed[self.bias_at() + i]);
        let l_enc = crate::learn::pack_read_factor(packed, self.enc_factor_at(), self.d_x)?;
        let mut w = DMatrix::zeros(self.d_y, self.d_x);
        let mut k = self.w_at();
        for r in 0..self.d_y {
            for c in 0..self.d_x {
                w[(r, c)] = packed[k];
                k += 1;
            }
        }
        let l_ry = crate::learn::pack_read_factor(packed, self.ry_factor_at(), self.d_y)?;
        let gamma_data = DVector::from_fn(self.gamma.len(), |i, _| packed[self.gamma_at() + i]);
        let gamma = ParamVector::from_raw(gamma_data, self.gamma)?.unpack()?;

        let encoder = LinearGaussianEncoder::new(map, bias, &l_enc * l_enc.transpose())?;
        let standin = LinearStandIn::new(w, &l_ry * l_ry.transpose(), frame_shape)?;
        Ok((encoder, standin, gamma.lgssm))
    }

    /// Reparameterized ELBO under fixed noise draws.
    fn objective(
        &self,
        packed: &DVector<f64>,
        frame_shape: (usize, usize),
        dataset: &[FrameSeq],
        draws: &[Vec<Vec<DVector<f64>>>],
    ) -> Result<f64> {
        let (encoder, standin, lgssm) = self.unpack(packed, frame_shape)?;
        let l_enc = crate::learn::pack_read_factor(packed, self.enc_factor_at(), self.d_x)?;
        let enc_cov = &l_enc * l_enc.transpose();
        let decoder_cov = standin.r_y.clone();

        let mut total = 0.0;
        for (seq, seq_draws) in dataset.iter().zip(draws.iter()) {
            let mut seq_elbo = 0.0;
            for sample_draws in seq_draws {
                let mut rec = 0.0;
                let mut ent = 0.0;
                let mut codes = DMatrix::zeros(seq.len(), self.d_x);
                for (t, frame) in seq.frames.iter().enumerate() {
                    let y = frame.to_vector();
                    let mean = &encoder.map * &y + &encoder.bias;
                    let x = &mean + &l_enc * &sample_draws[t];
                    let q = Gaussian::new(mean, enc_cov.clone())?;
                    ent -= q.log_density(&x)?;
                    let lik = Gaussian::new(&standin.w * &x, decoder_cov.clone())?;
                    rec += lik.log_density(&y)?;
                    codes.row_mut(t).copy_from(&x.transpose());
                }
                let lat = kalman_filter(&lgssm, &ObsSeq::fully_observed(codes)?)?.loglik;
                seq_elbo += rec + lat + ent;
            }
            total += seq_elbo / seq_draws.len() as f64;
        }
        Ok(total / dataset.len() as f64)
    }
}

fn tri(d: usize) -> usize {
    d * (d + 1) / 2
}

fn draw_noise<R: Rng>(
    dataset: &[FrameSeq],
    n_samples: usize,
    d_x: usize,
    rng: &mut R,
) -> Vec<Vec<Vec<DVector<f64>>>> {
    dataset
        .iter()
        .map(|seq| {
            (0..n_samples)
                .map(|_| {
                    (0..seq.len())
                        .map(|_| DVector::from_fn(d_x, |_, _| rng.sample(StandardNormal)))
                        .collect()
                })
                .collect()
        })
        .collect()
}

impl LinearGaussianEncoder {
    fn code_dim_internal(&self) -> usize {
        self.map.nrows()
    }
}
