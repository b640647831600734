//! Brute-force oracles for the motionssm test suites.
//!
//! Everything here is deliberately written the slow, obvious way and stays
//! independent of the implementation paths it checks: the dense joint
//! Gaussian is assembled by explicit linear propagation and conditioned by
//! Schur complements, log-densities go through an eigendecomposition rather
//! than the Cholesky route the filter uses, and the metric oracles are plain
//! nested loops.

pub mod dense;
pub mod fd;
pub mod mc;
pub mod naive;

pub use dense::{condition, log_density_eigen, marginal, DenseLgssm, Posterior};
pub use fd::central_difference;
pub use mc::mc_forecast_moments;
