//! Exact marginal-likelihood gradients via Fisher's identity,
//!
//! ```text
//! grad log p(x_{1:T}) = E_{p(z | x_{1:T})}[ grad log p(x, z) ],
//! ```
//!
//! evaluated with RTS smoothed means, covariances, and pairwise
//! cross-covariances, then chain-ruled through the Cholesky/log-diagonal
//! packing. The value returned is the Kalman filter log-likelihood itself.

use nalgebra::{DMatrix, DVector};

use super::pack::{DecodedParams, ParamVector};
use crate::error::Result;
use crate::gaussian::cholesky_with_jitter;
use crate::lgssm::{kalman_filter, rts_smooth, ObsSeq};

pub fn loglik_and_grad(params: &ParamVector, obs: &ObsSeq) -> Result<(f64, DVector<f64>)> {
    let decoded = params.unpack()?;
    let model = &decoded.lgssm;
    let filt = kalman_filter(model, obs)?;
    let smooth = rts_smooth(model, &filt)?;

    let d_z = model.state_dim();
    let t_len = obs.len();

    // Smoothed first and second moments, indices 0..=T with 0 = z_0.
    let mut means: Vec<&DVector<f64>> = Vec::with_capacity(t_len + 1);
    let mut covs: Vec<&DMatrix<f64>> = Vec::with_capacity(t_len + 1);
    means.push(&smooth.initial.mean);
    covs.push(&smooth.initial.cov);
    for g in &smooth.smoothed {
        means.push(&g.mean);
        covs.push(&g.cov);
    }
    // cross[t] = Cov(z_{t+1}, z_t | x), t = 0..T-1.
    let mut cross: Vec<&DMatrix<f64>> = Vec::with_capacity(t_len);
    cross.push(&smooth.initial_cross);
    for m in &smooth.pairwise_cov {
        cross.push(m);
    }

    // Transition sufficient statistics over all T transitions.
    let mut s00 = DMatrix::<f64>::zeros(d_z, d_z);
    let mut s10 = DMatrix::<f64>::zeros(d_z, d_z);
    let mut s11 = DMatrix::<f64>::zeros(d_z, d_z);
    for t in 0..t_len {
        s00 += covs[t] + means[t] * means[t].transpose();
        s10 += cross[t] + means[t + 1] * means[t].transpose();
        s11 += covs[t + 1] + means[t + 1] * means[t + 1].transpose();
    }

    // Observation statistics over the observed steps only.
    let d_x = model.obs_dim();
    let mut xm = DMatrix::<f64>::zeros(d_x, d_z); // sum x_t m_t^T
    let mut xx = DMatrix::<f64>::zeros(d_x, d_x); // sum x_t x_t^T
    let mut zz_obs = DMatrix::<f64>::zeros(d_z, d_z); // sum (P_t + m_t m_t^T)
    let mut n_obs = 0usize;
    for t in 0..t_len {
        if !obs.is_observed(t) {
            continue;
        }
        let x = obs.value(t);
        xm += &x * means[t + 1].transpose();
        xx += &x * x.transpose();
        zz_obs += covs[t + 1] + means[t + 1] * means[t + 1].transpose();
        n_obs += 1;
    }

    let q_inv = inverse_spd(&model.q)?;
    let r_inv = inverse_spd(&model.r)?;
    let s0_inv = inverse_spd(&model.sigma0)?;

    // Expected complete-data gradients, all matrices treated entrywise.
    let g_a = &q_inv * (&s10 - &model.a * &s00);
    let g_c = &r_inv * (&xm - &model.c * &zz_obs);
    let g_mu0 = &s0_inv * (means[0] - &model.mu0);

    let w_q = &s11 - &s10 * model.a.transpose() - &model.a * s10.transpose()
        + &model.a * &s00 * model.a.transpose();
    let g_q = 0.5 * (&q_inv * &w_q * &q_inv) - 0.5 * t_len as f64 * &q_inv;

    let w_r = &xx - &xm * model.c.transpose() - &model.c * xm.transpose()
        + &model.c * &zz_obs * model.c.transpose();
    let g_r = 0.5 * (&r_inv * &w_r * &r_inv) - 0.5 * n_obs as f64 * &r_inv;

    let dm0 = means[0] - &model.mu0;
    let w_0 = covs[0] + &dm0 * dm0.transpose();
    let g_s0 = 0.5 * (&s0_inv * &w_0 * &s0_inv) - 0.5 * &s0_inv;

    Ok((filt.loglik, assemble(params, &decoded, &g_a, &g_c, &g_mu0, &g_q, &g_r, &g_s0)))
}

fn inverse_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (chol, _) = cholesky_with_jitter(m)?;
    Ok(chol.solve(&DMatrix::identity(m.nrows(), m.ncols())))
}

/// Chain the entrywise covariance gradients through Sigma = L L^T and the
/// log-parameterized diagonal, then lay everything out in packing order.
#[allow(clippy::too_many_arguments)]
fn assemble(
    params: &ParamVector,
    decoded: &DecodedParams,
    g_a: &DMatrix<f64>,
    g_c: &DMatrix<f64>,
    g_mu0: &DVector<f64>,
    g_q: &DMatrix<f64>,
    g_r: &DMatrix<f64>,
    g_s0: &DMatrix<f64>,
) -> DVector<f64> {
    let p = params.packing();
    let mut grad = DVector::zeros(p.len());

    let mut k = p.a_offset();
    for r in 0..p.d_z {
        for c in 0..p.d_z {
            grad[k] = g_a[(r, c)];
            k += 1;
        }
    }
    k = p.c_offset();
    for r in 0..p.d_x {
        for c in 0..p.d_z {
            grad[k] = g_c[(r, c)];
            k += 1;
        }
    }
    for i in 0..p.d_z {
        grad[p.mu0_offset() + i] = g_mu0[i];
    }

    write_factor_grad(g_q, &decoded.l_q, &mut grad, p.lq_offset());
    write_factor_grad(g_r, &decoded.l_r, &mut grad, p.lr_offset());
    write_factor_grad(g_s0, &decoded.l_sigma0, &mut grad, p.ls0_offset());
    grad
}

/// d f / d L = (G + G^T) L restricted to the lower triangle, with diagonal
/// entries scaled by L_ii for the log parameterization.
fn write_factor_grad(g: &DMatrix<f64>, l: &DMatrix<f64>, out: &mut DVector<f64>, offset: usize) {
    let full = (g + g.transpose()) * l;
    let mut k = offset;
    for r in 0..l.nrows() {
        for c in 0..=r {
            out[k] = if r == c { full[(r, c)] * l[(r, c)] } else { full[(r, c)] };
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lgssm::LgssmParams;

    #[test]
    fn gradient_of_mu0_vanishes_at_the_symmetric_optimum() {
        // 1D model with mu0 = 0 observing x = 0: the likelihood is an even
        // function of mu0, so its derivative there is zero.
        let model = LgssmParams::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1e-12),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
            DMatrix::from_element(1, 1, 1e-12),
        )
        .unwrap();
        let pv = ParamVector::from_lgssm(&model).unwrap();
        let obs = ObsSeq::fully_observed(DMatrix::zeros(1, 1)).unwrap();
        let (_, grad) = loglik_and_grad(&pv, &obs).unwrap();
        let mu0_slot = pv.packing().mu0_offset();
        assert!(grad[mu0_slot].abs() < 1e-9, "grad wrt mu0 = {}", grad[mu0_slot]);
    }

    #[test]
    fn value_equals_filter_loglik() {
        let model = LgssmParams::new(
            DMatrix::from_row_slice(2, 2, &[0.9, 0.1, -0.1, 0.8]),
            DMatrix::from_row_slice(2, 2, &[0.4, 0.0, 0.0, 0.3]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.5]),
            DMatrix::from_element(1, 1, 0.2),
            DVector::zeros(2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let pv = ParamVector::from_lgssm(&model).unwrap();
        let obs =
            ObsSeq::fully_observed(DMatrix::from_column_slice(4, 1, &[0.3, -0.1, 0.5, 0.2]))
                .unwrap();
        let (value, _) = loglik_and_grad(&pv, &obs).unwrap();
        let decoded = pv.unpack().unwrap();
        let direct = kalman_filter(&decoded.lgssm, &obs).unwrap().loglik;
        assert_eq!(value, direct);
    }

    #[test]
    fn doubled_observations_pull_c_upward() {
        // Simulate at C = 1, then double the data; the likelihood gradient
        // with respect to C must point toward larger C.
        let model = LgssmParams::new(
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let (_, x) = crate::lgssm::simulate(&model, 500, 11).unwrap();
        let doubled = ObsSeq::fully_observed(2.0 * x).unwrap();
        let pv = ParamVector::from_lgssm(&model).unwrap();
        let (_, grad) = loglik_and_grad(&pv, &doubled).unwrap();
        let c_slot = pv.packing().c_offset();
        assert!(grad[c_slot] > 0.0, "grad wrt C = {}", grad[c_slot]);
    }
}
