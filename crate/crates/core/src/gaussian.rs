//! Mean–covariance carriers and dense Gaussian primitives.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub(crate) const LN_2PI: f64 = 1.8378770664093453;

/// A multivariate normal belief N(mean, cov).
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Time-indexed sequence of Gaussian beliefs.
pub type GaussianSeq = Vec<Gaussian>;

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Dim(format!(
                "covariance is {}x{} but mean has length {}",
                cov.nrows(),
                cov.ncols(),
                mean.len()
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Log-density at `x` in nats.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Dim(format!(
                "point has length {} but distribution has dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let (chol, _) = cholesky_with_jitter(&self.cov)
            .map_err(|_| Error::Numeric("covariance not positive definite in log_density".into()))?;
        let diff = x - &self.mean;
        let solved = chol.solve(&diff);
        let quad = diff.dot(&solved);
        Ok(-0.5 * (self.dim() as f64 * LN_2PI + chol_log_det(&chol) + quad))
    }

    /// Draw one sample. Accepts positive *semi*-definite covariances by using
    /// an eigendecomposition square root with negative eigenvalues clamped at
    /// the tolerance `-1e-10 * scale`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let root = psd_sqrt(&self.cov)?;
        let eps = DVector::from_fn(self.dim(), |_, _| rng.sample(StandardNormal));
        Ok(&self.mean + root * eps)
    }
}

/// Symmetric part (P + Pᵀ)/2; applied after covariance updates to stop
/// asymmetry from accumulating over long runs.
pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Cholesky with jitter escalation: try the matrix as given, then with
/// `1e-12 * trace/d` added to the diagonal, escalating by x10 up to three
/// times before giving up. Returns the decomposition and the jitter used.
pub(crate) fn cholesky_with_jitter(m: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let d = m.nrows();
    if let Some(chol) = m.clone().cholesky() {
        return Ok((chol, 0.0));
    }
    let base = 1e-12 * m.trace() / d as f64;
    let mut jitter = base;
    for _ in 0..3 {
        if jitter > 0.0 {
            let mut jittered = m.clone();
            for i in 0..d {
                jittered[(i, i)] += jitter;
            }
            if let Some(chol) = jittered.cholesky() {
                return Ok((chol, jitter));
            }
        }
        jitter *= 10.0;
    }
    Err(Error::Numeric(format!(
        "matrix not positive definite after jitter escalation (trace {:e})",
        m.trace()
    )))
}

pub(crate) fn chol_log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        acc += l[(i, i)].ln();
    }
    2.0 * acc
}

/// Symmetric square root of a PSD matrix via eigendecomposition. Errors when
/// an eigenvalue falls below `-1e-10 * max(1, |lambda|_max)`.
pub(crate) fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = symmetrize(m).symmetric_eigen();
    let max_abs = eig.eigenvalues.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
    let tol = -1e-10 * max_abs.max(1.0);
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < tol {
            return Err(Error::Numeric(format!(
                "covariance not positive semi-definite (eigenvalue {:e})",
                *v
            )));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// Largest absolute deviation from symmetry, max |m - mᵀ|.
pub(crate) fn symmetry_deviation(m: &DMatrix<f64>) -> f64 {
    let mut dev = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    dev
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetrize(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}
