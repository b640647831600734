//! Adam-style first-order ascent.

use nalgebra::DVector;

#[derive(Debug, Clone)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

/// First and second moment accumulators. Moments persist for the life of the
/// state; online adaptation does not reset them between samples.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: DVector<f64>,
    v: DVector<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self { m: DVector::zeros(dim), v: DVector::zeros(dim), step: 0 }
    }

    /// One ascent step: params += lr * m_hat / (sqrt(v_hat) + eps).
    pub fn ascend(&mut self, params: &mut DVector<f64>, grad: &DVector<f64>, cfg: &AdamConfig) {
        self.step += 1;
        let b1 = cfg.beta1;
        let b2 = cfg.beta2;
        let bc1 = 1.0 - b1.powi(self.step as i32);
        let bc2 = 1.0 - b2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * grad[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] += cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_roughly_the_learning_rate() {
        let cfg = AdamConfig { learning_rate: 0.1, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 };
        let mut st = AdamState::new(1);
        let mut p = DVector::zeros(1);
        st.ascend(&mut p, &DVector::from_element(1, 2.0), &cfg);
        // Bias correction makes the first step lr * g/|g|.
        assert!((p[0] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn ascent_climbs_a_quadratic() {
        let cfg = AdamConfig { learning_rate: 0.05, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 };
        let mut st = AdamState::new(1);
        let mut p = DVector::from_element(1, -3.0);
        for _ in 0..400 {
            let grad = DVector::from_element(1, -2.0 * p[0]); // maximize -p^2
            st.ascend(&mut p, &grad, &cfg);
        }
        assert!(p[0].abs() < 0.05, "ended at {}", p[0]);
    }
}
