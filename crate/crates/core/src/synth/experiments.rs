//! Experiment drivers reproducing the evaluation protocols on synthetic
//! ground truth: sparse-observation imputation scored by Dice/HD95 of the
//! decoded deformations, and online adaptation under a regime shift scored
//! by held-out forecast log-likelihood, RMSE, and Dice 25 steps ahead.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::phantom::{LABEL_INTERIOR, LABEL_RING};
use super::scenario::{synth_sequence, SynthOutput, SynthScenario};
use crate::deform::{warp, WarpMode};
use crate::error::{Error, Result};
use crate::learn::{evaluate_forecast, fit_offline, LearnerConfig, OnlineState, ParamVector};
use crate::lgssm::{forecast, kalman_filter, LgssmParams, ObsSeq};
use crate::metrics::{dice, hd95, Mask};
use crate::rng::{stream, stream_rng};

/// Per-stride imputation scores for one synthetic world.
#[derive(Debug, Clone)]
pub struct ImputationReport {
    pub stride: usize,
    /// Mean over frames of the ring/interior mean Dice.
    pub dice_mean: f64,
    /// Mean over frames (NaN frames skipped) of the ring/interior mean HD95.
    pub hd95_mean: f64,
    /// RMSE of the imputed code means against the emitted codes, all steps.
    pub x_rmse: f64,
    /// Same restricted to observed steps.
    pub observed_rmse: f64,
    /// dice_mean relative to the stride-1 run of the same world.
    pub dice_rel_stride1: f64,
    /// Per-frame mean Dice (ring/interior averaged).
    pub per_frame_dice: Vec<f64>,
    /// Per-frame mean HD95; NaN where a warped region vanished.
    pub per_frame_hd95: Vec<f64>,
}

struct StrideScores {
    dice_mean: f64,
    hd95_mean: f64,
    x_rmse: f64,
    observed_rmse: f64,
    per_frame_dice: Vec<f64>,
    per_frame_hd95: Vec<f64>,
}

/// Observe every `stride`-th code, impute the rest by smoothing under the
/// true parameters, decode the imputed means to deformations, and score the
/// warped labels against the ground-truth masks.
pub fn run_imputation_experiment(s: &SynthScenario, stride: usize) -> Result<ImputationReport> {
    if stride == 0 {
        return Err(Error::Precondition("stride must be positive".into()));
    }
    if s.t_len < 3 * stride {
        return Err(Error::Precondition(format!(
            "sequence length {} is too short for stride {stride} (need at least {})",
            s.t_len,
            3 * stride
        )));
    }
    let out = synth_sequence(s)?;
    let scores = stride_scores(s, &out, stride)?;
    let base_dice =
        if stride == 1 { scores.dice_mean } else { stride_scores(s, &out, 1)?.dice_mean };
    Ok(report_from(scores, stride, base_dice))
}

fn report_from(scores: StrideScores, stride: usize, base_dice: f64) -> ImputationReport {
    ImputationReport {
        stride,
        dice_mean: scores.dice_mean,
        hd95_mean: scores.hd95_mean,
        x_rmse: scores.x_rmse,
        observed_rmse: scores.observed_rmse,
        dice_rel_stride1: scores.dice_mean / base_dice,
        per_frame_dice: scores.per_frame_dice,
        per_frame_hd95: scores.per_frame_hd95,
    }
}

fn stride_scores(s: &SynthScenario, out: &SynthOutput, stride: usize) -> Result<StrideScores> {
    let t_len = s.t_len;
    let mask: Vec<bool> = (0..t_len).map(|t| t % stride == 0).collect();
    let obs = ObsSeq::new(out.observations.clone(), mask.clone(), 0)?;
    let imputed = crate::lgssm::impute(&s.lgssm, &obs)?;

    let mut sq_all = 0.0;
    let mut sq_obs = 0.0;
    let mut n_obs = 0usize;
    let mut per_frame_dice = Vec::with_capacity(t_len);
    let mut per_frame_hd95 = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mean = &imputed[t].mean;
        let truth = out.observations.row(t).transpose();
        let err = (mean - &truth).norm_squared();
        sq_all += err;
        if mask[t] {
            sq_obs += err;
            n_obs += 1;
        }

        let phi_hat = s.decode_deformation(mean)?;
        let warped = warp(&s.phantom, &phi_hat, WarpMode::Bilinear)?;
        let est_label = warped.label.as_ref().expect("phantom carries labels");
        let (d, h) = label_scores(est_label, &out.masks[t])?;
        per_frame_dice.push(d);
        per_frame_hd95.push(h);
    }

    let d_x = s.lgssm.obs_dim() as f64;
    let finite_hd: Vec<f64> = per_frame_hd95.iter().copied().filter(|v| v.is_finite()).collect();
    Ok(StrideScores {
        dice_mean: per_frame_dice.iter().sum::<f64>() / t_len as f64,
        hd95_mean: if finite_hd.is_empty() {
            f64::NAN
        } else {
            finite_hd.iter().sum::<f64>() / finite_hd.len() as f64
        },
        x_rmse: (sq_all / (t_len as f64 * d_x)).sqrt(),
        observed_rmse: (sq_obs / (n_obs as f64 * d_x)).sqrt(),
        per_frame_dice,
        per_frame_hd95,
    })
}

/// Mean over the two structures of (dice, hd95) between an estimated and a
/// ground-truth label image. HD95 is NaN when a structure vanished.
fn label_scores(estimated: &DMatrix<u8>, truth: &DMatrix<u8>) -> Result<(f64, f64)> {
    let mut dice_acc = 0.0;
    let mut hd_acc = 0.0;
    let mut hd_ok = true;
    for region in [LABEL_RING, LABEL_INTERIOR] {
        let a = Mask::from_label(estimated, region);
        let b = Mask::from_label(truth, region);
        dice_acc += dice(&a, &b)?;
        if a.count() == 0 || b.count() == 0 {
            hd_ok = false;
        } else {
            hd_acc += hd95(&a, &b)?;
        }
    }
    Ok((dice_acc / 2.0, if hd_ok { hd_acc / 2.0 } else { f64::NAN }))
}

/// Imputation across seeds and strides; the synthetic world is generated
/// once per seed and shared by all strides. Rows come back in (seed, stride)
/// order regardless of scheduling.
pub fn run_imputation_batch(
    base_seed: u64,
    n_seeds: usize,
    strides: &[usize],
    t_len: usize,
) -> Result<Vec<(u64, ImputationReport)>> {
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|k| base_seed + k).collect();
    let per_seed: Vec<Result<Vec<(u64, ImputationReport)>>> = seeds
        .par_iter()
        .map(|&seed| {
            let run = || -> Result<Vec<(u64, ImputationReport)>> {
                let s = SynthScenario::imputation_preset(seed, t_len)?;
                let out = synth_sequence(&s)?;
                let base = stride_scores(&s, &out, 1)?;
                let base_dice = base.dice_mean;
                let mut rows = Vec::new();
                for &stride in strides {
                    let scores =
                        if stride == 1 { stride_scores(&s, &out, 1)? } else { stride_scores(&s, &out, stride)? };
                    rows.push((seed, report_from(scores, stride, base_dice)));
                }
                Ok(rows)
            };
            run().map_err(|e| Error::Numeric(format!("seed {seed}: {e}")))
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_seed {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Scores for the adapted-versus-frozen comparison after streaming through a
/// (possibly null) regime shift. Forecast log-likelihoods are reported per
/// step (joint predictive log-density divided by the horizon), the scale the
/// reference results use.
#[derive(Debug, Clone)]
pub struct OnlineReport {
    pub adapted_loglik: f64,
    pub frozen_loglik: f64,
    pub adapted_rmse: f64,
    pub frozen_rmse: f64,
    pub adapted_dice25: f64,
    pub frozen_dice25: f64,
    pub pretrain_objective: f64,
    pub per_step_loglik: Vec<f64>,
}

/// Number of adaptation steps the protocol streams after the shift.
pub const ONLINE_STREAM_STEPS: usize = 300;

/// Pre-train on the pre-shift segment, stream the post-shift observations
/// through the moving-horizon learner configured by `online_cfg`, and
/// compare the adapted against the frozen parameters on the held-out last
/// `forecast_h` steps: exact forecast log-likelihood (per step), RMSE, and
/// Dice of the deformation decoded from the 25-step-ahead forecast mean.
pub fn run_online_experiment(
    s: &SynthScenario,
    online_cfg: &LearnerConfig,
    forecast_h: usize,
) -> Result<OnlineReport> {
    let shift = s
        .regime_shift
        .as_ref()
        .ok_or_else(|| Error::Precondition("online experiment needs a regime_shift entry".into()))?;
    if s.t_len < shift.at_step + ONLINE_STREAM_STEPS + forecast_h {
        return Err(Error::Precondition(format!(
            "sequence length {} is too short: need at least shift + {ONLINE_STREAM_STEPS} + H = {}",
            s.t_len,
            shift.at_step + ONLINE_STREAM_STEPS + forecast_h
        )));
    }

    let (_, observations) = super::scenario::synth_codes(s)?;
    let t_len = s.t_len;
    let split = t_len - forecast_h;

    // Pre-train a population model: the observed pre-shift segment plus a
    // corpus of sequences simulated from the same pre-shift dynamics (the
    // stand-in for training data from other subjects). Without the corpus a
    // single 150-sample segment overfits into collapsed noise variances and
    // useless long-horizon forecasts.
    let mut dataset =
        vec![ObsSeq::fully_observed(extract_rows(&observations, 0, shift.at_step))?];
    for k in 0..PRETRAIN_EXTRA_SEQS {
        let (_, x) = crate::lgssm::simulate(&s.lgssm, PRETRAIN_SEQ_LEN, pretrain_seed(s.seed, k))?;
        dataset.push(ObsSeq::fully_observed(x)?);
    }
    let init = default_init(s.lgssm.state_dim(), s.lgssm.obs_dim(), s.seed)?;
    let pretrain_cfg = LearnerConfig {
        learning_rate: 5e-3,
        max_iters: 600,
        grad_tol: 1e-4,
        seed: s.seed,
        ..Default::default()
    };
    let mut fit = fit_offline(&init, &dataset, &pretrain_cfg)?;
    // Fine-tune at a lower rate.
    let fine_cfg =
        LearnerConfig { learning_rate: 5e-4, max_iters: 220, grad_tol: 2e-5, ..pretrain_cfg };
    fit = fit_offline(&fit.params, &dataset, &fine_cfg)?;

    let frozen = fit.params.clone();
    let mut state = OnlineState::new(fit.params, online_cfg.clone())?;
    for t in shift.at_step..split {
        state.step(&observations.row(t).transpose())?;
    }
    let adapted = state.params().clone();
    let per_step_loglik = state.loglik_log().to_vec();

    let past = ObsSeq::fully_observed(extract_rows(&observations, 0, split))?;
    let future = ObsSeq::fully_observed(extract_rows(&observations, split, t_len))?;

    let adapted_model = adapted.unpack()?.lgssm;
    let frozen_model = frozen.unpack()?.lgssm;
    let ev_adapted = evaluate_forecast(&adapted_model, &past, &future)?;
    let ev_frozen = evaluate_forecast(&frozen_model, &past, &future)?;
    let per_step = 1.0 / forecast_h as f64;

    let dice_at = 25usize;
    let truth_code = observations.row(split + dice_at - 1).transpose();
    let truth_mask = super::scenario::truth_mask_for(s, &truth_code)?;
    let adapted_dice25 = dice25(s, &adapted_model, &past, dice_at, &truth_mask)?;
    let frozen_dice25 = dice25(s, &frozen_model, &past, dice_at, &truth_mask)?;

    Ok(OnlineReport {
        adapted_loglik: ev_adapted.loglik * per_step,
        frozen_loglik: ev_frozen.loglik * per_step,
        adapted_rmse: ev_adapted.rmse,
        frozen_rmse: ev_frozen.rmse,
        adapted_dice25,
        frozen_dice25,
        pretrain_objective: fit.best_objective,
        per_step_loglik,
    })
}

fn dice25(
    s: &SynthScenario,
    model: &LgssmParams,
    past: &ObsSeq,
    k: usize,
    truth_mask: &DMatrix<u8>,
) -> Result<f64> {
    let filt = kalman_filter(model, past)?;
    let fc = forecast(model, filt.filtered.last().expect("non-empty"), k)?;
    let code = &fc.observations[k - 1].mean;
    let phi = s.decode_deformation(code)?;
    let warped = warp(&s.phantom, &phi, WarpMode::Bilinear)?;
    let est = warped.label.as_ref().expect("phantom carries labels");
    let (d, _) = label_scores(est, truth_mask)?;
    Ok(d)
}

/// Generic seeded initialization for pre-training: damped identity
/// transition, small random observation map, moderate noise scales.
fn default_init(d_z: usize, d_x: usize, seed: u64) -> Result<ParamVector> {
    let mut rng = stream_rng(seed, stream::INIT);
    let a = DMatrix::from_fn(d_z, d_z, |r, c| {
        let base = if r == c { 0.9 } else { 0.0 };
        base + 0.02 * rng.sample::<f64, _>(StandardNormal)
    });
    let c = DMatrix::from_fn(d_x, d_z, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
    let model = LgssmParams::new(
        a,
        DMatrix::identity(d_z, d_z) * 0.3,
        c,
        DMatrix::identity(d_x, d_x) * 0.1,
        DVector::zeros(d_z),
        DMatrix::identity(d_z, d_z),
    )?;
    ParamVector::from_lgssm(&model)
}

fn extract_rows(m: &DMatrix<f64>, from: usize, to: usize) -> DMatrix<f64> {
    m.rows(from, to - from).clone_owned()
}

/// Simulated "other subject" sequences added to the pre-training corpus.
const PRETRAIN_EXTRA_SEQS: u64 = 5;

/// Length of each simulated pre-training sequence.
const PRETRAIN_SEQ_LEN: usize = 140;

fn pretrain_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1 + k)
}

/// Online experiment across seeds. `shifted = false` runs the null control.
pub fn run_online_batch(
    base_seed: u64,
    n_seeds: usize,
    t_len: usize,
    shifted: bool,
    online_cfg: &LearnerConfig,
    forecast_h: usize,
) -> Result<Vec<(u64, OnlineReport)>> {
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|k| base_seed + k).collect();
    let rows: Vec<Result<(u64, OnlineReport)>> = seeds
        .par_iter()
        .map(|&seed| {
            let run = || -> Result<OnlineReport> {
                let s = SynthScenario::online_preset(seed, t_len, shifted)?;
                run_online_experiment(&s, online_cfg, forecast_h)
            };
            run().map(|r| (seed, r)).map_err(|e| Error::Numeric(format!("seed {seed}: {e}")))
        })
        .collect();
    rows.into_iter().collect()
}

/// Learner configuration the online preset streams with: the reference
/// horizon N = 75 and a learning rate low enough that same-regime streaming
/// stays harmless while regime shifts are still tracked.
pub fn online_preset_cfg() -> LearnerConfig {
    LearnerConfig { learning_rate: 1.2e-4, horizon: 75, ..Default::default() }
}
