//! Shared random-instance generators for the oracle test suites.

use motionssm::lgssm::{LgssmParams, ObsSeq};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_psd<R: Rng>(rng: &mut R, d: usize, scale: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let m = &g * g.transpose() * (scale / d as f64) + DMatrix::identity(d, d) * (0.05 * scale);
    0.5 * (&m + m.transpose())
}

/// Random model with the transition scaled to spectral radius about 0.9.
pub fn random_params<R: Rng>(rng: &mut R, d_z: usize, d_x: usize) -> LgssmParams {
    let mut a = DMatrix::from_fn(d_z, d_z, |_, _| rng.sample::<f64, _>(StandardNormal));
    let spectral = a.clone().symmetric_eigen().eigenvalues.amax().max(1e-6);
    a *= rng.random_range(0.3..0.9) / spectral;
    let c = DMatrix::from_fn(d_x, d_z, |_, _| rng.sample::<f64, _>(StandardNormal));
    LgssmParams::new(
        a,
        random_psd(rng, d_z, 0.8),
        c,
        random_psd(rng, d_x, 0.5),
        DVector::from_fn(d_z, |_, _| rng.sample::<f64, _>(StandardNormal)),
        random_psd(rng, d_z, 1.0),
    )
    .expect("construction of a random PSD model")
}

/// Random observations with a random (never empty) missing mask.
pub fn random_obs<R: Rng>(rng: &mut R, t_len: usize, d_x: usize, missing: bool) -> ObsSeq {
    let values = DMatrix::from_fn(t_len, d_x, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut mask: Vec<bool> = (0..t_len).map(|_| !missing || rng.random_bool(0.7)).collect();
    if mask.iter().all(|&m| !m) {
        mask[rng.random_range(0..t_len)] = true;
    }
    ObsSeq::new(values, mask, 0).expect("consistent observation sequence")
}
