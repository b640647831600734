//! Monte-Carlo rollout oracle with its own sampling path.

use motionssm::lgssm::LgssmParams;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Empirical per-horizon moments of `n` forward rollouts started from
/// N(start_mean, start_cov). Returns (state means, state covs, obs means,
/// obs covs), each indexed by horizon 0..k-1.
#[allow(clippy::type_complexity)]
pub fn mc_forecast_moments(
    params: &LgssmParams,
    start_mean: &DVector<f64>,
    start_cov: &DMatrix<f64>,
    k: usize,
    n: usize,
    seed: u64,
) -> (Vec<DVector<f64>>, Vec<DMatrix<f64>>, Vec<DVector<f64>>, Vec<DMatrix<f64>>) {
    let d_z = params.state_dim();
    let d_x = params.obs_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let root_start = eigen_sqrt(start_cov);
    let root_q = eigen_sqrt(&params.q);
    let root_r = eigen_sqrt(&params.r);

    let mut sum_z = vec![DVector::<f64>::zeros(d_z); k];
    let mut sum_zz = vec![DMatrix::<f64>::zeros(d_z, d_z); k];
    let mut sum_x = vec![DVector::<f64>::zeros(d_x); k];
    let mut sum_xx = vec![DMatrix::<f64>::zeros(d_x, d_x); k];

    for _ in 0..n {
        let mut z = start_mean + &root_start * normal_vec(d_z, &mut rng);
        for j in 0..k {
            z = &params.a * z + &root_q * normal_vec(d_z, &mut rng);
            let x = &params.c * &z + &root_r * normal_vec(d_x, &mut rng);
            sum_z[j] += &z;
            sum_zz[j] += &z * z.transpose();
            sum_x[j] += &x;
            sum_xx[j] += &x * x.transpose();
        }
    }

    let nf = n as f64;
    let mut mean_z = Vec::with_capacity(k);
    let mut cov_z = Vec::with_capacity(k);
    let mut mean_x = Vec::with_capacity(k);
    let mut cov_x = Vec::with_capacity(k);
    for j in 0..k {
        let mz = &sum_z[j] / nf;
        cov_z.push(&sum_zz[j] / nf - &mz * mz.transpose());
        mean_z.push(mz);
        let mx = &sum_x[j] / nf;
        cov_x.push(&sum_xx[j] / nf - &mx * mx.transpose());
        mean_x.push(mx);
    }
    (mean_z, cov_z, mean_x, cov_x)
}

fn normal_vec<R: Rng>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

fn eigen_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = 0.5 * (m + m.transpose());
    let eig = sym.symmetric_eigen();
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        assert!(*v > -1e-10, "oracle covariance not PSD");
        *v = v.max(0.0).sqrt();
    }
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}
