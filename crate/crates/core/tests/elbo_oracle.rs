//! The ELBO against exact dense-Gaussian evidence on the linear stand-in.

use motionssm::deform::{Frame, FrameSeq};
use motionssm::elbo::{elbo_estimate, ElboEstimate, LinearStandIn};
use motionssm::lgssm::LgssmParams;
use motionssm_testkit::{log_density_eigen, DenseLgssm};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Model with temporally independent codes (A = 0), for which the per-step
/// posterior encoder is the exact joint posterior.
fn independent_model() -> LgssmParams {
    LgssmParams::new(
        DMatrix::zeros(2, 2),
        DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.2, 0.6]),
        DMatrix::from_row_slice(1, 2, &[1.0, -0.7]),
        DMatrix::from_element(1, 1, 0.3),
        DVector::from_vec(vec![0.4, -0.1]),
        DMatrix::identity(2, 2),
    )
    .unwrap()
}

fn correlated_model() -> LgssmParams {
    LgssmParams::new(
        DMatrix::from_row_slice(2, 2, &[0.85, 0.1, -0.1, 0.75]),
        DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.4]),
        DMatrix::from_row_slice(1, 2, &[1.0, -0.7]),
        DMatrix::from_element(1, 1, 0.3),
        DVector::zeros(2),
        DMatrix::identity(2, 2),
    )
    .unwrap()
}

fn standin() -> LinearStandIn {
    LinearStandIn::new(
        DMatrix::from_column_slice(4, 1, &[1.0, -0.4, 0.6, 0.2]),
        DMatrix::identity(4, 4) * 0.2,
        (2, 2),
    )
    .unwrap()
}

/// Frames sampled from the stand-in generative chain.
fn sample_frames(lgssm: &LgssmParams, standin: &LinearStandIn, t_len: usize, seed: u64) -> FrameSeq {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, x) = motionssm::lgssm::simulate(lgssm, t_len, seed).unwrap();
    let chol = standin.r_y.clone().cholesky().unwrap();
    let frames: Vec<Frame> = (0..t_len)
        .map(|t| {
            let code = x.row(t).transpose();
            let noise = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = &standin.w * code + chol.l() * noise;
            Frame::from_vector(&y, (2, 2)).unwrap()
        })
        .collect();
    let reference = Frame::from_vector(&DVector::zeros(4), (2, 2)).unwrap();
    FrameSeq::new(reference, frames).unwrap()
}

/// Exact log evidence of the stacked frames under (lgssm, standin) by dense
/// joint-Gaussian construction, fully outside the filter code path.
fn exact_evidence(lgssm: &LgssmParams, standin: &LinearStandIn, seq: &FrameSeq) -> f64 {
    let t_len = seq.len();
    let d_x = lgssm.obs_dim();
    let d_y = standin.obs_dim();
    let oracle = DenseLgssm::build(lgssm, t_len);

    // Marginal of the stacked codes (x_1 .. x_T).
    let mut idx = Vec::new();
    for t in 1..=t_len {
        idx.extend(oracle.x_block(t));
    }
    let (mx, cx) = motionssm_testkit::marginal(&oracle.mean, &oracle.cov, &idx);

    // y = (I kron W) x + noise.
    let n = t_len * d_y;
    let mut lift = DMatrix::<f64>::zeros(n, t_len * d_x);
    let mut noise = DMatrix::<f64>::zeros(n, n);
    for t in 0..t_len {
        lift.view_mut((t * d_y, t * d_x), (d_y, d_x)).copy_from(&standin.w);
        noise.view_mut((t * d_y, t * d_y), (d_y, d_y)).copy_from(&standin.r_y);
    }
    let mean_y = &lift * mx;
    let cov_y = &lift * cx * lift.transpose() + noise;

    let mut stacked = DVector::zeros(n);
    for (t, frame) in seq.frames.iter().enumerate() {
        stacked.rows_mut(t * d_y, d_y).copy_from(&frame.to_vector());
    }
    log_density_eigen(&stacked, &mean_y, &cov_y)
}

fn estimate(
    lgssm: &LgssmParams,
    standin: &LinearStandIn,
    seq: &FrameSeq,
    widen: Option<f64>,
    n: usize,
) -> ElboEstimate {
    let mut enc = standin.exact_posterior_encoder(lgssm).unwrap();
    if let Some(f) = widen {
        enc = enc.widened(f);
    }
    elbo_estimate(&enc, &standin.decoder(), lgssm, seq, n, 2024).unwrap()
}

#[test]
fn exact_posterior_encoder_makes_the_bound_tight() {
    let lgssm = independent_model();
    let si = standin();
    let seq = sample_frames(&lgssm, &si, 3, 8);
    let est = estimate(&lgssm, &si, &seq, None, 10_000);
    let evidence = exact_evidence(&lgssm, &si, &seq);
    // With the exact posterior the integrand is constant and the standard
    // error collapses to float noise; keep an absolute floor in the band.
    let band = (3.0 * est.std_error).max(1e-8);
    assert!(
        (est.value - evidence).abs() <= band,
        "elbo {} vs evidence {evidence}, band {band:.2e}",
        est.value
    );
    assert_eq!(est.value, est.reconstruction + est.latent + est.entropy);
}

#[test]
fn widened_encoders_leave_a_visible_gap() {
    let lgssm = independent_model();
    let si = standin();
    let seq = sample_frames(&lgssm, &si, 3, 9);
    let est = estimate(&lgssm, &si, &seq, Some(4.0), 10_000);
    let evidence = exact_evidence(&lgssm, &si, &seq);
    assert!(
        est.value < evidence - 3.0 * est.std_error,
        "elbo {} should sit clearly below the evidence {evidence} (se {})",
        est.value,
        est.std_error
    );
}

#[test]
fn the_bound_holds_for_arbitrary_encoders_and_correlated_codes() {
    let si = standin();
    for (k, lgssm) in [independent_model(), correlated_model()].iter().enumerate() {
        let seq = sample_frames(lgssm, &si, 4, 20 + k as u64);
        let evidence = exact_evidence(lgssm, &si, &seq);
        for (j, widen) in [0.25, 1.0, 2.0, 4.0].iter().enumerate() {
            let est = estimate(lgssm, &si, &seq, Some(*widen), 4000);
            assert!(
                est.value <= evidence + 3.0 * est.std_error.max(1e-8),
                "model {k} widen {j}: elbo {} vs evidence {evidence}",
                est.value
            );
        }
    }
}

#[test]
fn estimates_are_bit_reproducible_for_a_fixed_seed() {
    let lgssm = correlated_model();
    let si = standin();
    let seq = sample_frames(&lgssm, &si, 3, 30);
    let enc = si.exact_posterior_encoder(&lgssm).unwrap();
    let a = elbo_estimate(&enc, &si.decoder(), &lgssm, &seq, 64, 5).unwrap();
    let b = elbo_estimate(&enc, &si.decoder(), &lgssm, &seq, 64, 5).unwrap();
    assert_eq!(a.value, b.value);
    assert_eq!(a.std_error, b.std_error);
}
