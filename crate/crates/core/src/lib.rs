//! Probabilistic motion modeling toolkit.
//!
//! The crate combines four pieces verified end to end on synthetic image
//! sequences:
//!
//! * [`lgssm`] — exact inference (filtering, RTS smoothing, forecasting,
//!   imputation, simulation) for linear Gaussian state-space models;
//! * [`learn`] — maximum-likelihood parameter estimation on the exact
//!   marginal likelihood, offline and online over a moving horizon;
//! * [`elbo`] — a Monte-Carlo evidence lower bound over pluggable
//!   encoder/decoder pairs, with an exact linear-Gaussian stand-in;
//! * [`deform`] + [`metrics`] + [`synth`] — diffeomorphic deformation of 2D
//!   images through stationary velocity fields, evaluation metrics, and a
//!   ground-truth synthetic harness tying everything together.

pub mod deform;
pub mod elbo;
mod error;
mod gaussian;
pub mod io;
pub mod learn;
pub mod lgssm;
pub mod metrics;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use gaussian::{Gaussian, GaussianSeq};
