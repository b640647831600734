//! Filter, smoother, forecast, and imputation against the dense
//! joint-Gaussian oracle and a Monte-Carlo rollout oracle.

mod common;

use common::{random_obs, random_params, rng};
use motionssm::learn::evaluate_forecast;
use motionssm::lgssm::{forecast, impute, kalman_filter, rts_smooth, simulate, ObsSeq};
use motionssm_testkit::{mc_forecast_moments, DenseLgssm};
use nalgebra::DMatrix;
use rand::Rng;

#[test]
fn smoothed_marginals_match_dense_conditioning() {
    // The reference instance: d_z = 2, d_x = 1, T = 5, seeded.
    let mut r = rng(505);
    let params = random_params(&mut r, 2, 1);
    let obs = random_obs(&mut r, 5, 1, false);
    let filt = kalman_filter(&params, &obs).unwrap();
    let sm = rts_smooth(&params, &filt).unwrap();

    let oracle = DenseLgssm::build(&params, 5);
    let post = oracle.posterior_given_observed(obs.mask(), obs.values());
    for t in 0..5 {
        let z = oracle.z_block(t + 1);
        let mean = post.mean_of(&z);
        let cov = post.cov_of(&z, &z);
        assert!((&sm.smoothed[t].mean - &mean).amax() < 1e-8, "mean at t={t}");
        assert!((&sm.smoothed[t].cov - &cov).amax() < 1e-8, "cov at t={t}");
    }
    // Pairwise cross-covariances, including the initial state block.
    for t in 0..4 {
        let znext = oracle.z_block(t + 2);
        let zcur = oracle.z_block(t + 1);
        let cross = post.cov_of(&znext, &zcur);
        assert!((&sm.pairwise_cov[t] - &cross).amax() < 1e-8, "pairwise at t={t}");
    }
    let z0 = oracle.z_block(0);
    let z1 = oracle.z_block(1);
    assert!((&sm.initial.mean - post.mean_of(&z0)).amax() < 1e-8);
    assert!((&sm.initial.cov - post.cov_of(&z0, &z0)).amax() < 1e-8);
    assert!((&sm.initial_cross - post.cov_of(&z1, &z0)).amax() < 1e-8);
}

#[test]
fn missing_data_loglik_equals_the_density_of_the_selected_rows() {
    for seed in 0..30 {
        let mut r = rng(900 + seed);
        let d_z = r.random_range(1..=3);
        let d_x = r.random_range(1..=2);
        let t_len = r.random_range(1..=8);
        let params = random_params(&mut r, d_z, d_x);
        let obs = random_obs(&mut r, t_len, d_x, true);
        let filt = kalman_filter(&params, &obs).unwrap();
        let oracle = DenseLgssm::build(&params, t_len);
        let expect = oracle.log_density_of_observed(obs.mask(), obs.values());
        assert!(
            (filt.loglik - expect).abs() < 1e-8,
            "seed {seed}: filter {} vs oracle {expect}",
            filt.loglik
        );
    }
}

#[test]
fn filtered_covariance_never_exceeds_predicted() {
    for seed in 0..20 {
        let mut r = rng(40 + seed);
        let params = random_params(&mut r, 3, 2);
        let obs = random_obs(&mut r, 6, 2, true);
        let filt = kalman_filter(&params, &obs).unwrap();
        for t in 0..obs.len() {
            if !obs.is_observed(t) {
                continue;
            }
            let gap = &filt.predicted[t].cov - &filt.filtered[t].cov;
            let min_eig =
                gap.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min_eig > -1e-10, "seed {seed} step {t}: min eig {min_eig}");
        }
    }
}

#[test]
fn one_step_forecast_is_the_next_predicted_belief() {
    for seed in 0..10 {
        let mut r = rng(700 + seed);
        let params = random_params(&mut r, 2, 2);
        let obs = random_obs(&mut r, 6, 2, false);
        let filt_all = kalman_filter(&params, &obs).unwrap();

        let first5 = ObsSeq::new(
            obs.values().rows(0, 5).clone_owned(),
            obs.mask()[..5].to_vec(),
            0,
        )
        .unwrap();
        let filt5 = kalman_filter(&params, &first5).unwrap();
        let fc = forecast(&params, filt5.filtered.last().unwrap(), 1).unwrap();
        assert!((&fc.states[0].mean - &filt_all.predicted[5].mean).amax() < 1e-12);
        assert!((&fc.states[0].cov - &filt_all.predicted[5].cov).amax() < 1e-12);
    }
}

#[test]
fn forecast_blocks_match_dense_marginals_of_the_extended_joint() {
    let mut r = rng(321);
    let params = random_params(&mut r, 2, 2);
    let obs = random_obs(&mut r, 6, 2, true);
    let k = 4;
    let filt = kalman_filter(&params, &obs).unwrap();
    let fc = forecast(&params, filt.filtered.last().unwrap(), k).unwrap();

    let oracle = DenseLgssm::build(&params, 6 + k);
    let mut mask = obs.mask().to_vec();
    mask.extend(vec![false; k]);
    let mut values = DMatrix::zeros(6 + k, 2);
    values.view_mut((0, 0), (6, 2)).copy_from(obs.values());
    let post = oracle.posterior_given_observed(&mask, &values);
    for j in 0..k {
        let z = oracle.z_block(6 + j + 1);
        let x = oracle.x_block(6 + j + 1);
        assert!((&fc.states[j].mean - post.mean_of(&z)).amax() < 1e-8, "state mean j={j}");
        assert!((&fc.states[j].cov - post.cov_of(&z, &z)).amax() < 1e-8, "state cov j={j}");
        assert!((&fc.observations[j].mean - post.mean_of(&x)).amax() < 1e-8, "obs mean j={j}");
        assert!((&fc.observations[j].cov - post.cov_of(&x, &x)).amax() < 1e-8, "obs cov j={j}");
    }
}

#[test]
fn forecast_moments_match_a_million_monte_carlo_rollouts() {
    let mut r = rng(606);
    let params = random_params(&mut r, 2, 1);
    let obs = random_obs(&mut r, 5, 1, false);
    let filt = kalman_filter(&params, &obs).unwrap();
    let last = filt.filtered.last().unwrap();
    let k = 10;
    let n = 1_000_000usize;
    let fc = forecast(&params, last, k).unwrap();
    let (mz, cz, mx, cx) = mc_forecast_moments(&params, &last.mean, &last.cov, k, n, 17);

    let nf = n as f64;
    for j in 0..k {
        for i in 0..2 {
            let se = (fc.states[j].cov[(i, i)] / nf).sqrt();
            let diff = (fc.states[j].mean[i] - mz[j][i]).abs();
            assert!(diff < 4.0 * se, "state mean j={j} i={i}: diff {diff}, se {se}");
        }
        let se_x = (fc.observations[j].cov[(0, 0)] / nf).sqrt();
        assert!((fc.observations[j].mean[0] - mx[j][0]).abs() < 4.0 * se_x);
        for (a, b) in [(0, 0), (0, 1), (1, 1)] {
            let var_est = (fc.states[j].cov[(a, a)] * fc.states[j].cov[(b, b)]
                + fc.states[j].cov[(a, b)].powi(2))
                / nf;
            let diff = (fc.states[j].cov[(a, b)] - cz[j][(a, b)]).abs();
            assert!(diff < 4.0 * var_est.sqrt(), "state cov j={j} ({a},{b})");
        }
        let var_est =
            (2.0 * fc.observations[j].cov[(0, 0)].powi(2)) / nf;
        assert!((fc.observations[j].cov[(0, 0)] - cx[j][(0, 0)]).abs() < 4.0 * var_est.sqrt());
    }
}

#[test]
fn imputation_beats_zero_order_hold_on_sparse_observations() {
    let mut r = rng(777);
    let params = random_params(&mut r, 2, 1);
    let t_len = 100;
    let (z, x) = simulate(&params, t_len, 42).unwrap();
    let mask: Vec<bool> = (0..t_len).map(|t| t % 10 == 0).collect();
    let obs = ObsSeq::new(x.clone(), mask.clone(), 0).unwrap();
    let imputed = impute(&params, &obs).unwrap();

    // Ground truth in observation space is the noiseless map of the latents.
    let truth: Vec<f64> = (0..t_len).map(|t| (&params.c * z.row(t).transpose())[0]).collect();
    let mut hold = x[(0, 0)];
    let mut sq_imputed = 0.0;
    let mut sq_hold = 0.0;
    for t in 0..t_len {
        if mask[t] {
            hold = x[(t, 0)];
        }
        sq_imputed += (imputed[t].mean[0] - truth[t]).powi(2);
        sq_hold += (hold - truth[t]).powi(2);
    }
    assert!(
        sq_imputed < sq_hold,
        "imputation RMSE {} vs zero-order hold {}",
        (sq_imputed / t_len as f64).sqrt(),
        (sq_hold / t_len as f64).sqrt()
    );
}

#[test]
fn forecast_loglik_matches_the_dense_conditional_density() {
    for seed in 0..10 {
        let mut r = rng(3000 + seed);
        let params = random_params(&mut r, 2, 1);
        let past = random_obs(&mut r, 5, 1, false);
        let future = random_obs(&mut r, 3, 1, false);
        let ev = evaluate_forecast(&params, &past, &future).unwrap();

        // Oracle: joint density over all 8 steps minus the past density.
        let oracle = DenseLgssm::build(&params, 8);
        let mut values = DMatrix::zeros(8, 1);
        values.view_mut((0, 0), (5, 1)).copy_from(past.values());
        values.view_mut((5, 0), (3, 1)).copy_from(future.values());
        let all_mask = vec![true; 8];
        let past_mask: Vec<bool> = (0..8).map(|t| t < 5).collect();
        let expect = oracle.log_density_of_observed(&all_mask, &values)
            - oracle.log_density_of_observed(&past_mask, &values);
        assert!(
            (ev.loglik - expect).abs() < 1e-8,
            "seed {seed}: {} vs {expect}",
            ev.loglik
        );
    }
}
