use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::deform::{
    exp_svf, gaussian_smooth, jacobian_det, warp, DeformField, Frame, VelocityField, WarpMode,
};
use crate::error::{Error, Result};
use crate::gaussian::psd_sqrt;
use crate::lgssm::{simulate_with_rng, LgssmParams};
use crate::rng::{stream, stream_rng};

/// Replace the transition matrix from `at_step` onward. A shift with
/// `new_a == a` is the null control: the pipeline runs identically but the
/// dynamics never change.
#[derive(Debug, Clone)]
pub struct RegimeShift {
    pub at_step: usize,
    pub new_a: DMatrix<f64>,
}

/// Ground-truth world for the synthetic experiments: temporal model, code
/// basis fields, phantom reference, and generation knobs.
#[derive(Debug, Clone)]
pub struct SynthScenario {
    pub lgssm: LgssmParams,
    pub basis: Vec<VelocityField>,
    pub phantom: Frame,
    pub t_len: usize,
    pub sigma_g: f64,
    pub obs_noise: f64,
    pub regime_shift: Option<RegimeShift>,
    pub seed: u64,
}

/// Everything the generator produced, all of length T.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub latents: DMatrix<f64>,
    pub observations: DMatrix<f64>,
    pub frames: Vec<Frame>,
    pub deformations: Vec<DeformField>,
    pub masks: Vec<DMatrix<u8>>,
}

pub(crate) const SQUARINGS: u32 = 4;
const JACDET_FLOOR: f64 = 0.1;

impl SynthScenario {
    /// Validate invariants and certify the basis: deformations decoded from
    /// codes on the 3-sigma Mahalanobis shell of the stationary code
    /// distribution must keep the minimum Jacobian determinant above 0.1.
    pub fn new(
        lgssm: LgssmParams,
        basis: Vec<VelocityField>,
        phantom: Frame,
        t_len: usize,
        sigma_g: f64,
        obs_noise: f64,
        regime_shift: Option<RegimeShift>,
        seed: u64,
    ) -> Result<Self> {
        let d_x = lgssm.obs_dim();
        if basis.len() != d_x {
            return Err(Error::Dim(format!(
                "{} basis fields for code dimension {d_x}",
                basis.len()
            )));
        }
        let shape = phantom.shape();
        if basis.iter().any(|b| b.shape() != shape) {
            return Err(Error::Dim("basis fields must match the phantom shape".into()));
        }
        if phantom.label.is_none() {
            return Err(Error::Invalid("the phantom must carry a label mask".into()));
        }
        if let Some(shift) = &regime_shift {
            if shift.new_a.shape() != (lgssm.state_dim(), lgssm.state_dim()) {
                return Err(Error::Dim("replacement A has the wrong shape".into()));
            }
            if shift.at_step >= t_len {
                return Err(Error::Precondition("regime shift lies beyond the sequence".into()));
            }
        }
        let scenario =
            Self { lgssm, basis, phantom, t_len, sigma_g, obs_noise, regime_shift, seed };
        scenario.certify_diffeomorphic()?;
        Ok(scenario)
    }

    /// Velocity field for one code vector: v = sum_i x_i B_i.
    pub fn decode_velocity(&self, code: &DVector<f64>) -> Result<VelocityField> {
        if code.len() != self.basis.len() {
            return Err(Error::Dim("code length does not match the basis".into()));
        }
        let (h, w) = self.phantom.shape();
        let mut acc = VelocityField::zeros(h, w);
        for (i, b) in self.basis.iter().enumerate() {
            acc = acc.add(&b.scaled(code[i]))?;
        }
        Ok(acc)
    }

    /// Full decode: code -> smoothed velocity -> deformation.
    pub fn decode_deformation(&self, code: &DVector<f64>) -> Result<DeformField> {
        let v = self.decode_velocity(code)?;
        Ok(exp_svf(&gaussian_smooth(&v, self.sigma_g)?, SQUARINGS))
    }

    fn certify_diffeomorphic(&self) -> Result<()> {
        let shell = self.shell_probes()?;
        for (k, code) in shell.iter().enumerate() {
            let phi = self.decode_deformation(code)?;
            let min_det = jacobian_det(&phi)?.min();
            if min_det <= JACDET_FLOOR {
                return Err(Error::Invalid(format!(
                    "basis produces a near-folding deformation (probe {k}, min |J| = {min_det:.3})"
                )));
            }
        }
        Ok(())
    }

    /// Probe codes on the 3-sigma Mahalanobis shell of the stationary code
    /// distribution: both axis extremes and a handful of seeded random
    /// directions, under the initial and (if any) post-shift dynamics.
    fn shell_probes(&self) -> Result<Vec<DVector<f64>>> {
        let d_x = self.lgssm.obs_dim();
        let mut sqrts = vec![stationary_code_sqrt(&self.lgssm, None)?];
        if let Some(shift) = &self.regime_shift {
            sqrts.push(stationary_code_sqrt(&self.lgssm, Some(&shift.new_a))?);
        }
        let mut rng = stream_rng(self.seed, stream::SCENARIO);
        let mut probes = Vec::new();
        for sqrt in &sqrts {
            for i in 0..d_x {
                let mut e = DVector::zeros(d_x);
                e[i] = 3.0;
                probes.push(sqrt * &e);
                e[i] = -3.0;
                probes.push(sqrt * &e);
            }
            for _ in 0..8 {
                let mut u = DVector::from_fn(d_x, |_, _| rng.sample::<f64, _>(StandardNormal));
                let norm = u.norm();
                if norm > 0.0 {
                    u /= norm;
                }
                probes.push(sqrt * (3.0 * u));
            }
        }
        Ok(probes)
    }
}

/// Ground-truth label mask for a single code vector.
pub(crate) fn truth_mask_for(s: &SynthScenario, code: &DVector<f64>) -> Result<DMatrix<u8>> {
    let phi = s.decode_deformation(code)?;
    let warped = warp(&s.phantom, &phi, WarpMode::Bilinear)?;
    Ok(warped.label.expect("phantom carries labels"))
}

/// Symmetric square root of the stationary covariance of x = C z + noise,
/// with the stationary state covariance solved by fixed-point iteration of
/// the discrete Lyapunov equation.
fn stationary_code_sqrt(lgssm: &LgssmParams, a_override: Option<&DMatrix<f64>>) -> Result<DMatrix<f64>> {
    let a = a_override.unwrap_or(&lgssm.a);
    let mut s = lgssm.q.clone();
    for _ in 0..20_000 {
        let next = a * &s * a.transpose() + &lgssm.q;
        let delta = (&next - &s).abs().max();
        s = next;
        if delta < 1e-12 * (1.0 + s.abs().max()) {
            let sx = &lgssm.c * &s * lgssm.c.transpose() + &lgssm.r;
            return psd_sqrt(&sx);
        }
    }
    Err(Error::Numeric("stationary covariance iteration did not converge (unstable A?)".into()))
}

/// Latents and codes only (no frame rendering), bit-identical to the code
/// half of [`synth_sequence`].
pub(crate) fn synth_codes(s: &SynthScenario) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut rng = stream_rng(s.seed, stream::SCENARIO_SIM);
    let shift = s.regime_shift.as_ref().map(|r| (r.at_step, &r.new_a));
    let (latents, mut observations) = simulate_with_rng(&s.lgssm, s.t_len, &mut rng, shift)?;
    if s.obs_noise > 0.0 {
        for v in observations.iter_mut() {
            *v += s.obs_noise * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok((latents, observations))
}

/// Run the full generative chain: latents and codes from the temporal model
/// (with optional regime shift), per-step deformation decode, warped frames
/// and label masks. Deterministic per seed.
pub fn synth_sequence(s: &SynthScenario) -> Result<SynthOutput> {
    let (latents, observations) = synth_codes(s)?;

    let mut frames = Vec::with_capacity(s.t_len);
    let mut deformations = Vec::with_capacity(s.t_len);
    let mut masks = Vec::with_capacity(s.t_len);
    for t in 0..s.t_len {
        let code = observations.row(t).transpose();
        let phi = s.decode_deformation(&code)?;
        let min_det = jacobian_det(&phi)?.min();
        if min_det <= 0.0 {
            return Err(Error::Numeric(format!(
                "non-diffeomorphic deformation at step {t} (min |J| = {min_det:.4})"
            )));
        }
        let warped = warp(&s.phantom, &phi, WarpMode::Bilinear)?;
        masks.push(warped.label.clone().expect("phantom carries labels"));
        frames.push(warped);
        deformations.push(phi);
    }
    Ok(SynthOutput { latents, observations, frames, deformations, masks })
}

/// Rotation-block temporal model with the reference dimensions d_x = 8,
/// d_z = 16: eight 2D rotations with seeded angles and radii, process noise
/// scaled for unit stationary variance per block, a seeded dense
/// observation map, and observation noise R = r_scale * I.
pub(crate) fn rotation_model(seed: u64, d_x: usize, d_z: usize, r_scale: f64) -> Result<LgssmParams> {
    assert!(d_z % 2 == 0, "rotation model needs an even state dimension");
    let mut rng = stream_rng(seed, stream::SCENARIO);
    let mut a = DMatrix::zeros(d_z, d_z);
    let mut q = DMatrix::zeros(d_z, d_z);
    for b in 0..d_z / 2 {
        let angle: f64 = rng.random_range(0.05..0.40);
        let radius: f64 = rng.random_range(0.960..0.995);
        let (sin, cos) = (angle.sin() * radius, angle.cos() * radius);
        let o = 2 * b;
        a[(o, o)] = cos;
        a[(o, o + 1)] = -sin;
        a[(o + 1, o)] = sin;
        a[(o + 1, o + 1)] = cos;
        // Stationary variance of an isotropic rotation block is
        // q / (1 - radius^2); scale for unit variance.
        let qv = 1.0 - radius * radius;
        q[(o, o)] = qv;
        q[(o + 1, o + 1)] = qv;
    }
    let c = DMatrix::from_fn(d_x, d_z, |_, _| {
        rng.sample::<f64, _>(StandardNormal) / (d_z as f64).sqrt()
    });
    LgssmParams::new(
        a,
        q,
        c,
        DMatrix::identity(d_x, d_x) * r_scale,
        DVector::zeros(d_z),
        DMatrix::identity(d_z, d_z),
    )
}

/// Speed up every rotation block; used as the regime shift.
pub(crate) fn rotated_transition(a: &DMatrix<f64>, seed: u64) -> DMatrix<f64> {
    let d_z = a.nrows();
    let mut rng = stream_rng(seed, stream::INIT);
    let mut out = a.clone();
    for b in 0..d_z / 2 {
        let o = 2 * b;
        let cos = a[(o, o)];
        let sin = a[(o + 1, o)];
        let radius = (cos * cos + sin * sin).sqrt();
        let angle = sin.atan2(cos);
        let new_angle = angle * rng.random_range(2.8..3.8) + 0.2;
        let (s2, c2) = (new_angle.sin() * radius, new_angle.cos() * radius);
        out[(o, o)] = c2;
        out[(o, o + 1)] = -s2;
        out[(o + 1, o)] = s2;
        out[(o + 1, o + 1)] = c2;
    }
    out
}

/// Low-frequency sinusoidal basis fields attenuated by a central Gaussian
/// window, jointly rescaled so the worst probe on the 3-sigma shell reaches
/// `target_max` pixels of displacement.
pub(crate) fn calibrated_basis(
    lgssm: &LgssmParams,
    shape: (usize, usize),
    sigma_g: f64,
    target_max: f64,
    seed: u64,
    shifted_a: Option<&DMatrix<f64>>,
) -> Result<Vec<VelocityField>> {
    let d_x = lgssm.obs_dim();
    let (h, w) = shape;
    let mut rng = stream_rng(seed.wrapping_add(0x5eed), stream::SCENARIO);
    let cy = (h - 1) as f64 / 2.0;
    let cx = (w - 1) as f64 / 2.0;
    let falloff = 0.18 * (h.min(w) as f64);

    let mut basis = Vec::with_capacity(d_x);
    for _ in 0..d_x {
        let fr = rng.random_range(0.5..1.6);
        let fc = rng.random_range(0.5..1.6);
        let phase0: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let phase1: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let amp0 = rng.random_range(-1.0..1.0);
        let amp1 = rng.random_range(-1.0..1.0);
        let d0 = DMatrix::from_fn(h, w, |r, c| {
            let window = (-((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2))
                / (2.0 * falloff * falloff))
                .exp();
            let arg = std::f64::consts::TAU * (fr * r as f64 / h as f64 + fc * c as f64 / w as f64);
            amp0 * (arg + phase0).sin() * window
        });
        let d1 = DMatrix::from_fn(h, w, |r, c| {
            let window = (-((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2))
                / (2.0 * falloff * falloff))
                .exp();
            let arg = std::f64::consts::TAU * (fr * r as f64 / h as f64 + fc * c as f64 / w as f64);
            amp1 * (arg + phase1).cos() * window
        });
        basis.push(gaussian_smooth(&VelocityField::new(d0, d1)?, sigma_g)?);
    }

    // Probe the shell under both dynamics and find the worst smoothed
    // velocity magnitude, then rescale every field jointly.
    let mut sqrts = vec![stationary_code_sqrt(lgssm, None)?];
    if let Some(a2) = shifted_a {
        sqrts.push(stationary_code_sqrt(lgssm, Some(a2))?);
    }
    let mut worst = 0.0f64;
    for sqrt in &sqrts {
        let mut probes = Vec::new();
        for i in 0..d_x {
            let mut e = DVector::zeros(d_x);
            e[i] = 3.0;
            probes.push(sqrt * &e);
            e[i] = -3.0;
            probes.push(sqrt * &e);
        }
        for _ in 0..8 {
            let mut u = DVector::from_fn(d_x, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = u.norm();
            if norm > 0.0 {
                u /= norm;
            }
            probes.push(sqrt * (3.0 * u));
        }
        for code in &probes {
            let mut acc = VelocityField::zeros(h, w);
            for (i, b) in basis.iter().enumerate() {
                acc = acc.add(&b.scaled(code[i]))?;
            }
            worst = worst.max(gaussian_smooth(&acc, sigma_g)?.max_magnitude());
        }
    }
    if worst == 0.0 {
        return Err(Error::Numeric("degenerate basis: zero displacement on the shell".into()));
    }
    let scale = target_max / worst;
    Ok(basis.into_iter().map(|b| b.scaled(scale)).collect())
}

impl SynthScenario {
    /// Reference imputation world: 64x64 phantom, d_x = 8 / d_z = 16
    /// rotation dynamics, sigma_g = 2, calibrated basis, T = 275 by default.
    pub fn imputation_preset(seed: u64, t_len: usize) -> Result<Self> {
        let lgssm = rotation_model(seed, 8, 16, 0.02)?;
        let phantom = make_64_phantom(seed)?;
        let basis = calibrated_basis(&lgssm, phantom.shape(), 2.0, 3.0, seed, None)?;
        SynthScenario::new(lgssm, basis, phantom, t_len, 2.0, 0.0, None, seed)
    }

    /// Regime-shift world for online learning: pre-shift segment of 150
    /// steps, then faster rotations. `shifted = false` builds the null
    /// control (identical pipeline, unchanged dynamics). Observation noise
    /// is an order of magnitude above the imputation world so learned
    /// models stay honestly calibrated rather than memorizing windows.
    pub fn online_preset(seed: u64, t_len: usize, shifted: bool) -> Result<Self> {
        let lgssm = rotation_model(seed, 8, 16, 0.1)?;
        let new_a =
            if shifted { rotated_transition(&lgssm.a, seed) } else { lgssm.a.clone() };
        let phantom = make_64_phantom(seed)?;
        let basis =
            calibrated_basis(&lgssm, phantom.shape(), 2.0, 3.0, seed, Some(&new_a))?;
        let shift = RegimeShift { at_step: ONLINE_SHIFT_STEP, new_a };
        SynthScenario::new(lgssm, basis, phantom, t_len, 2.0, 0.0, Some(shift), seed)
    }
}

/// Step at which the online preset swaps the dynamics.
pub const ONLINE_SHIFT_STEP: usize = 150;

fn make_64_phantom(seed: u64) -> Result<Frame> {
    super::make_phantom(64, 64, seed)
}
