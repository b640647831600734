use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::grad::loglik_and_grad;
use super::pack::ParamVector;
use super::{AdamState, LearnerConfig};
use crate::error::{Error, Result};
use crate::lgssm::{kalman_filter, ObsSeq};

/// Streaming moving-horizon learner.
///
/// Each arriving sample is pushed into a ring buffer of the N most recent
/// observations (evicting the oldest once full), then
/// `inner_steps_per_sample` gradient updates maximize the exact marginal
/// log-likelihood of the buffered window. Windows shorter than N use all
/// available samples. One stream per instance; optimizer moments persist
/// across samples.
#[derive(Debug, Clone)]
pub struct OnlineState {
    params: ParamVector,
    cfg: LearnerConfig,
    buffer: VecDeque<DVector<f64>>,
    adam: AdamState,
    steps_seen: u64,
    loglik_log: Vec<f64>,
}

impl OnlineState {
    pub fn new(params: ParamVector, cfg: LearnerConfig) -> Result<Self> {
        cfg.validate()?;
        params.unpack()?;
        let dim = params.len();
        Ok(Self {
            params,
            cfg,
            buffer: VecDeque::new(),
            adam: AdamState::new(dim),
            steps_seen: 0,
            loglik_log: Vec::new(),
        })
    }

    /// Push one observation and adapt the parameters on the buffered window.
    /// The window log-likelihood under the pre-update parameters is recorded.
    pub fn step(&mut self, new_obs: &DVector<f64>) -> Result<()> {
        let d_x = self.params.packing().d_x;
        if new_obs.len() != d_x {
            return Err(Error::Dim(format!(
                "observation has dimension {} but the model expects {}",
                new_obs.len(),
                d_x
            )));
        }
        self.buffer.push_back(new_obs.clone());
        while self.buffer.len() > self.cfg.horizon {
            self.buffer.pop_front();
        }
        self.steps_seen += 1;

        let window = self.window_obs()?;
        if self.cfg.inner_steps_per_sample == 0 {
            let decoded = self.params.unpack()?;
            let ll = kalman_filter(&decoded.lgssm, &window)?.loglik;
            self.loglik_log.push(ll);
            return Ok(());
        }

        let adam_cfg = self.cfg.adam();
        for inner in 0..self.cfg.inner_steps_per_sample {
            let (ll, grad) = loglik_and_grad(&self.params, &window)?;
            if inner == 0 {
                self.loglik_log.push(ll);
            }
            self.adam.ascend(self.params.data_mut(), &grad, &adam_cfg);
        }
        Ok(())
    }

    fn window_obs(&self) -> Result<ObsSeq> {
        let d_x = self.params.packing().d_x;
        let rows = self.buffer.len();
        let values = DMatrix::from_fn(rows, d_x, |t, i| self.buffer[t][i]);
        ObsSeq::fully_observed(values)
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn into_params(self) -> ParamVector {
        self.params
    }

    pub fn window_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn steps_seen(&self) -> u64 {
        self.steps_seen
    }

    /// Per-step window log-likelihoods, one entry per processed sample.
    pub fn loglik_log(&self) -> &[f64] {
        &self.loglik_log
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lgssm::{simulate, LgssmParams};

    fn scalar_model(a: f64) -> LgssmParams {
        LgssmParams::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.4),
            DVector::zeros(1),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn zero_inner_steps_leave_parameters_unchanged() {
        let pv = ParamVector::from_lgssm(&scalar_model(0.7)).unwrap();
        let cfg = LearnerConfig { inner_steps_per_sample: 0, ..Default::default() };
        let mut st = OnlineState::new(pv.clone(), cfg).unwrap();
        for v in [0.3, -0.2, 0.9] {
            st.step(&DVector::from_element(1, v)).unwrap();
        }
        assert_eq!(st.params().data(), pv.data());
        assert_eq!(st.window_len(), 3);
        assert_eq!(st.loglik_log().len(), 3);
    }

    #[test]
    fn window_holds_exactly_the_n_most_recent_samples() {
        let pv = ParamVector::from_lgssm(&scalar_model(0.7)).unwrap();
        let cfg = LearnerConfig { horizon: 5, inner_steps_per_sample: 0, ..Default::default() };
        let mut st = OnlineState::new(pv, cfg).unwrap();
        for k in 0..12 {
            st.step(&DVector::from_element(1, k as f64)).unwrap();
            assert_eq!(st.window_len(), (k + 1).min(5));
        }
        let window = st.window_obs().unwrap();
        let vals: Vec<f64> = (0..5).map(|t| window.value(t)[0]).collect();
        assert_eq!(vals, vec![7.0, 8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn online_adaptation_is_bit_reproducible() {
        let truth = scalar_model(0.8);
        let (_, x) = simulate(&truth, 60, 5).unwrap();
        let pv = ParamVector::from_lgssm(&scalar_model(0.4)).unwrap();
        let cfg = LearnerConfig { horizon: 10, ..Default::default() };
        let mut a = OnlineState::new(pv.clone(), cfg.clone()).unwrap();
        let mut b = OnlineState::new(pv, cfg).unwrap();
        for t in 0..x.nrows() {
            let row = DVector::from_element(1, x[(t, 0)]);
            a.step(&row).unwrap();
            b.step(&row).unwrap();
        }
        assert_eq!(a.params().data(), b.params().data());
        assert_eq!(a.loglik_log(), b.loglik_log());
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let pv = ParamVector::from_lgssm(&scalar_model(0.7)).unwrap();
        let mut st = OnlineState::new(pv, LearnerConfig::default()).unwrap();
        assert!(st.step(&DVector::zeros(2)).is_err());
    }
}
