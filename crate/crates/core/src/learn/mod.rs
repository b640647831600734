//! Maximum-likelihood estimation of the state-space parameters by gradient
//! ascent on the exact Kalman marginal log-likelihood, including online
//! adaptation over a moving horizon of the N most recent samples.

mod adam;
mod eval;
mod grad;
mod offline;
mod online;
mod pack;

pub use adam::{AdamConfig, AdamState};
pub use eval::{evaluate_forecast, evaluate_forecast_mc, ForecastEval};
pub use grad::loglik_and_grad;
pub use offline::{fit_offline, FitResult, IterRecord};
pub use online::OnlineState;
pub use pack::{DecodedParams, ParamPacking, ParamVector};

pub(crate) use pack::{read_factor as pack_read_factor, write_factor as pack_write_factor};

use crate::error::{Error, Result};

/// Optimizer and horizon configuration. Defaults follow the reference
/// training setup: Adam with learning rate 5e-4 and decay 0.9/0.999,
/// moving horizon N = 75, one gradient step per arriving sample.
#[derive(Debug, Clone)]
pub struct LearnerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    /// Stop when the gradient infinity-norm drops below this; 0 disables.
    pub grad_tol: f64,
    /// Moving-horizon length N.
    pub horizon: usize,
    pub inner_steps_per_sample: usize,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iters: 500,
            grad_tol: 0.0,
            horizon: 75,
            inner_steps_per_sample: 1,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Invalid("learning rate must be positive".into()));
        }
        if self.horizon < 2 {
            return Err(Error::Invalid("horizon N must be at least 2".into()));
        }
        Ok(())
    }

    pub(crate) fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_training_setup() {
        let cfg = LearnerConfig::default();
        assert_eq!(cfg.learning_rate, 5e-4);
        assert_eq!(cfg.horizon, 75);
        assert_eq!(cfg.inner_steps_per_sample, 1);
        assert_eq!(cfg.beta1, 0.9);
        assert_eq!(cfg.beta2, 0.999);
        assert_eq!(cfg.epsilon, 1e-8);
    }

    #[test]
    fn horizon_below_two_is_rejected() {
        let cfg = LearnerConfig { horizon: 1, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
