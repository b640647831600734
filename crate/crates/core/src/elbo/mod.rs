//! Monte-Carlo evidence lower bound over a pluggable encoder/decoder pair.
//!
//! The bound on log p(y_{1:T} | y_0) draws per-step codes from the encoder,
//! scores them under the decoder likelihood, and resolves the inner latent
//! expectation analytically: E_{p(z|x)}[log p(x,z) - log p(z|x)] collapses to
//! the exact marginal log p(x), supplied by the Kalman filter. A sampling
//! cross-check of that collapse is kept alongside.
//!
//! The linear-Gaussian stand-in replaces the convolutional networks with
//! y_t = W x_t + noise, for which the exact evidence is computable and the
//! bound can be verified end to end.

mod estimate;
mod fit;
mod standin;

pub use estimate::{elbo_estimate, latent_term, latent_term_mc, ElboEstimate};
pub use fit::{joint_fit, JointFitConfig, JointFitResult};
pub use standin::{LinearGaussianEncoder, LinearStandIn};

use nalgebra::DVector;

use crate::deform::Frame;
use crate::error::Result;
use crate::gaussian::Gaussian;

/// Inference network q_phi: per-step Gaussian code distribution given the
/// reference frame and the current frame.
pub trait Encoder {
    fn encode(&self, y0: &Frame, y_t: &Frame) -> Result<Gaussian>;
    /// Code dimension d_x.
    fn code_dim(&self) -> usize;
}

/// Opaque spatial features extracted once from the reference frame.
#[derive(Debug, Clone)]
pub struct SpatialFeatures(pub DVector<f64>);

/// Generative network p_theta: likelihood over the flattened frame given a
/// code and the reference features.
pub trait Decoder {
    fn feature_extract(&self, y0: &Frame) -> SpatialFeatures;
    /// Parameters of p(y_t | y_0, x_t) as a Gaussian over vec(y_t).
    fn decode(&self, x_t: &DVector<f64>, features: &SpatialFeatures) -> Result<Gaussian>;
}
