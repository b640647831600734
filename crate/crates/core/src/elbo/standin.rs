use nalgebra::{DMatrix, DVector};

use super::{Decoder, Encoder, SpatialFeatures};
use crate::deform::Frame;
use crate::error::{Error, Result};
use crate::gaussian::{cholesky_with_jitter, symmetrize, Gaussian};
use crate::lgssm::LgssmParams;

/// Linear-Gaussian observation stand-in y_t = W x_t + eta, eta ~ N(0, R_y),
/// over frames flattened row-major to d_y = H * W.
#[derive(Debug, Clone)]
pub struct LinearStandIn {
    pub w: DMatrix<f64>,
    pub r_y: DMatrix<f64>,
    pub frame_shape: (usize, usize),
}

impl LinearStandIn {
    pub fn new(w: DMatrix<f64>, r_y: DMatrix<f64>, frame_shape: (usize, usize)) -> Result<Self> {
        let d_y = frame_shape.0 * frame_shape.1;
        if w.nrows() != d_y {
            return Err(Error::Dim(format!(
                "W has {} rows but the frame shape implies d_y = {d_y}",
                w.nrows()
            )));
        }
        if r_y.shape() != (d_y, d_y) {
            return Err(Error::Dim("R_y must be d_y x d_y".into()));
        }
        Ok(Self { w, r_y, frame_shape })
    }

    pub fn code_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn obs_dim(&self) -> usize {
        self.w.nrows()
    }

    /// The matching decoder: p(y_t | x_t) = N(W x_t, R_y).
    pub fn decoder(&self) -> LinearStandInDecoder {
        LinearStandInDecoder { w: self.w.clone(), r_y: self.r_y.clone() }
    }

    /// Single-frame posterior encoder q(x_t | y_t) built by conjugate
    /// Gaussian inference against the model's one-step marginal prior
    /// N(C A mu0, C (A Sigma0 A^T + Q) C^T + R).
    ///
    /// When the temporal model renders the codes independent across time
    /// (A = 0 makes every marginal equal to this prior), the product of
    /// these per-step posteriors is the exact joint posterior and the ELBO
    /// becomes tight; for correlated codes it remains a valid encoder and
    /// the bound is strict.
    pub fn exact_posterior_encoder(&self, lgssm: &LgssmParams) -> Result<LinearGaussianEncoder> {
        if lgssm.obs_dim() != self.code_dim() {
            return Err(Error::Dim("temporal model and stand-in disagree on d_x".into()));
        }
        let prior_mean = &lgssm.c * &lgssm.a * &lgssm.mu0;
        let prior_cov = symmetrize(
            &(&lgssm.c
                * (&lgssm.a * &lgssm.sigma0 * lgssm.a.transpose() + &lgssm.q)
                * lgssm.c.transpose()
                + &lgssm.r),
        );
        let (prior_chol, _) = cholesky_with_jitter(&prior_cov)?;
        let prior_inv = prior_chol.solve(&DMatrix::identity(self.code_dim(), self.code_dim()));
        let (ry_chol, _) = cholesky_with_jitter(&self.r_y)?;
        let ry_inv_w = ry_chol.solve(&self.w);

        let precision = &prior_inv + self.w.transpose() * &ry_inv_w;
        let (prec_chol, _) = cholesky_with_jitter(&precision)?;
        let post_cov =
            symmetrize(&prec_chol.solve(&DMatrix::identity(self.code_dim(), self.code_dim())));
        let map = &post_cov * ry_inv_w.transpose();
        let bias = &post_cov * (&prior_inv * prior_mean);
        LinearGaussianEncoder::new(map, bias, post_cov)
    }
}

/// Affine Gaussian encoder q(x_t | y_t) = N(M vec(y_t) + b, cov). The
/// reference frame does not enter: the stand-in infers codes from the
/// current frame alone.
#[derive(Debug, Clone)]
pub struct LinearGaussianEncoder {
    pub map: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl LinearGaussianEncoder {
    pub fn new(map: DMatrix<f64>, bias: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d_x = map.nrows();
        if bias.len() != d_x || cov.shape() != (d_x, d_x) {
            return Err(Error::Dim("encoder map, bias, and covariance disagree".into()));
        }
        Ok(Self { map, bias, cov })
    }

    /// Same encoder with the covariance inflated by `factor` (used to build
    /// deliberately loose bounds in tests).
    pub fn widened(&self, factor: f64) -> Self {
        Self { map: self.map.clone(), bias: self.bias.clone(), cov: &self.cov * factor }
    }
}

impl Encoder for LinearGaussianEncoder {
    fn encode(&self, _y0: &Frame, y_t: &Frame) -> Result<Gaussian> {
        let y = y_t.to_vector();
        if y.len() != self.map.ncols() {
            return Err(Error::Dim(format!(
                "frame flattens to {} but the encoder expects {}",
                y.len(),
                self.map.ncols()
            )));
        }
        Gaussian::new(&self.map * y + &self.bias, self.cov.clone())
    }

    fn code_dim(&self) -> usize {
        self.map.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct LinearStandInDecoder {
    pub w: DMatrix<f64>,
    pub r_y: DMatrix<f64>,
}

impl Decoder for LinearStandInDecoder {
    fn feature_extract(&self, _y0: &Frame) -> SpatialFeatures {
        SpatialFeatures(DVector::zeros(0))
    }

    fn decode(&self, x_t: &DVector<f64>, _features: &SpatialFeatures) -> Result<Gaussian> {
        if x_t.len() != self.w.ncols() {
            return Err(Error::Dim("code dimension does not match the decoder".into()));
        }
        Gaussian::new(&self.w * x_t, self.r_y.clone())
    }
}
