//! Exact inference for the linear Gaussian state-space model
//!
//! ```text
//! z_t | z_{t-1} ~ N(A z_{t-1}, Q),   x_t | z_t ~ N(C z_t, R),   z_0 ~ N(mu0, Sigma0),
//! ```
//!
//! with observations x_1..x_T. Filtering, RTS smoothing, forecasting,
//! imputation over missing samples, ancestral simulation, and the exact
//! marginal log-likelihood are all closed form and implemented here.

mod filter;
mod sim;
mod smooth;

pub use filter::kalman_filter;
pub use sim::{forecast, impute, simulate, ForecastResult};
pub use smooth::rts_smooth;

pub(crate) use sim::simulate_with_rng;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{min_eigenvalue, symmetry_deviation, Gaussian, GaussianSeq};

/// Largest tolerated asymmetry and eigenvalue deficit for covariance inputs.
const PSD_TOL: f64 = 1e-10;

/// Parameter set of the model: transition `A`, process noise `Q`,
/// observation map `C`, observation noise `R`, and the initial state
/// moments `mu0`, `sigma0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LgssmParams {
    pub a: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub mu0: DVector<f64>,
    pub sigma0: DMatrix<f64>,
}

impl LgssmParams {
    pub fn new(
        a: DMatrix<f64>,
        q: DMatrix<f64>,
        c: DMatrix<f64>,
        r: DMatrix<f64>,
        mu0: DVector<f64>,
        sigma0: DMatrix<f64>,
    ) -> Result<Self> {
        let d_z = a.nrows();
        let d_x = c.nrows();
        if d_z == 0 || a.ncols() != d_z {
            return Err(Error::Dim("A must be square with d_z > 0".into()));
        }
        if d_x == 0 || c.ncols() != d_z {
            return Err(Error::Dim("C must be d_x x d_z with d_x > 0".into()));
        }
        if q.shape() != (d_z, d_z) {
            return Err(Error::Dim("Q must be d_z x d_z".into()));
        }
        if r.shape() != (d_x, d_x) {
            return Err(Error::Dim("R must be d_x x d_x".into()));
        }
        if mu0.len() != d_z {
            return Err(Error::Dim("mu0 must have length d_z".into()));
        }
        if sigma0.shape() != (d_z, d_z) {
            return Err(Error::Dim("Sigma0 must be d_z x d_z".into()));
        }
        for (name, m) in [("A", &a), ("Q", &q), ("C", &c), ("R", &r), ("Sigma0", &sigma0)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("{name} contains non-finite entries")));
            }
        }
        if mu0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("mu0 contains non-finite entries".into()));
        }
        for (name, m) in [("Q", &q), ("R", &r), ("Sigma0", &sigma0)] {
            let dev = symmetry_deviation(m);
            if dev >= PSD_TOL {
                return Err(Error::Invalid(format!(
                    "{name} is not symmetric (max deviation {dev:e})"
                )));
            }
            let lam = min_eigenvalue(m);
            if lam < -PSD_TOL {
                return Err(Error::Invalid(format!(
                    "{name} is not positive semi-definite (min eigenvalue {lam:e})"
                )));
            }
        }
        Ok(Self { a, q, c, r, mu0, sigma0 })
    }

    /// Latent dimension d_z.
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Observation dimension d_x.
    pub fn obs_dim(&self) -> usize {
        self.c.nrows()
    }
}

/// Time-indexed observation sequence with per-step missing flags.
///
/// Row `t` of `values` is x_{t+1} in model terms; `observed[t] == false`
/// marks the row as missing, and every consumer ignores it.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsSeq {
    values: DMatrix<f64>,
    observed: Vec<bool>,
    t0_index: i64,
}

impl ObsSeq {
    pub fn new(values: DMatrix<f64>, observed: Vec<bool>, t0_index: i64) -> Result<Self> {
        if values.nrows() != observed.len() {
            return Err(Error::Dim(format!(
                "{} observation rows but {} mask entries",
                values.nrows(),
                observed.len()
            )));
        }
        if values
            .row_iter()
            .zip(observed.iter())
            .any(|(row, &obs)| obs && row.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Invalid("observed rows must be finite".into()));
        }
        Ok(Self { values, observed, t0_index })
    }

    pub fn fully_observed(values: DMatrix<f64>) -> Result<Self> {
        let mask = vec![true; values.nrows()];
        Self::new(values, mask, 0)
    }

    pub fn from_rows(rows: &[DVector<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Precondition("observation sequence is empty".into()));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dim("observation rows have mixed lengths".into()));
        }
        let values = DMatrix::from_fn(rows.len(), d, |t, i| rows[t][i]);
        Self::fully_observed(values)
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn obs_dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_observed(&self, t: usize) -> bool {
        self.observed[t]
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    /// Row `t` as a column vector.
    pub fn value(&self, t: usize) -> DVector<f64> {
        self.values.row(t).transpose()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.observed
    }

    pub fn t0_index(&self) -> i64 {
        self.t0_index
    }

    /// Concatenation of `self` followed by `other` (used to evaluate exact
    /// predictive densities by the chain rule).
    pub fn concat(&self, other: &ObsSeq) -> Result<ObsSeq> {
        if self.obs_dim() != other.obs_dim() {
            return Err(Error::Dim("cannot concatenate sequences of different dimension".into()));
        }
        let t = self.len() + other.len();
        let values = DMatrix::from_fn(t, self.obs_dim(), |i, j| {
            if i < self.len() {
                self.values[(i, j)]
            } else {
                other.values[(i - self.len(), j)]
            }
        });
        let mut observed = self.observed.clone();
        observed.extend_from_slice(&other.observed);
        ObsSeq::new(values, observed, self.t0_index)
    }
}

/// Output of the forward pass: one-step predictive and filtered beliefs per
/// step, the exact marginal log-likelihood of the observed entries, and its
/// per-step decomposition (zero at missing steps).
#[derive(Debug, Clone)]
pub struct FilterResult {
    pub predicted: GaussianSeq,
    pub filtered: GaussianSeq,
    pub loglik: f64,
    pub per_step_loglik: Vec<f64>,
}

/// Output of the backward pass: smoothed marginals p(z_t | x_{1:T}),
/// the pairwise cross-covariances Cov(z_{t+1}, z_t | x_{1:T}), and the
/// smoothed initial state z_0 with its cross-covariance to z_1 (needed by
/// gradient computations over the complete-data likelihood).
#[derive(Debug, Clone)]
pub struct SmoothResult {
    pub smoothed: GaussianSeq,
    /// `pairwise_cov[t]` = Cov(z_{t+2}, z_{t+1} | x_{1:T}) between
    /// `smoothed[t+1]` and `smoothed[t]`; length T-1.
    pub pairwise_cov: Vec<DMatrix<f64>>,
    /// Smoothed belief over the pre-observation state z_0.
    pub initial: Gaussian,
    /// Cov(z_1, z_0 | x_{1:T}).
    pub initial_cross: DMatrix<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n)
    }

    #[test]
    fn rejects_dimension_mismatches() {
        let bad = LgssmParams::new(
            eye(2),
            eye(2),
            DMatrix::zeros(1, 3),
            eye(1),
            DVector::zeros(2),
            eye(2),
        );
        assert!(matches!(bad, Err(Error::Dim(_))));
    }

    #[test]
    fn rejects_asymmetric_covariance() {
        let mut q = eye(2);
        q[(0, 1)] = 1e-6;
        let bad = LgssmParams::new(eye(2), q, eye(2), eye(2), DVector::zeros(2), eye(2));
        assert!(matches!(bad, Err(Error::Invalid(_))));
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let r = DMatrix::from_row_slice(1, 1, &[-0.5]);
        let bad = LgssmParams::new(eye(1), eye(1), eye(1), r, DVector::zeros(1), eye(1));
        assert!(matches!(bad, Err(Error::Invalid(_))));
    }

    #[test]
    fn allows_exactly_singular_covariances() {
        let p = LgssmParams::new(
            eye(1),
            DMatrix::zeros(1, 1),
            eye(1),
            eye(1),
            DVector::zeros(1),
            DMatrix::zeros(1, 1),
        );
        assert!(p.is_ok());
    }

    #[test]
    fn obs_seq_mask_length_must_match() {
        let values = DMatrix::zeros(3, 2);
        assert!(ObsSeq::new(values, vec![true, false], 0).is_err());
    }

    #[test]
    fn obs_seq_ignores_non_finite_masked_rows() {
        let mut values = DMatrix::zeros(2, 1);
        values[(1, 0)] = f64::NAN;
        let seq = ObsSeq::new(values.clone(), vec![true, false], 0).unwrap();
        assert_eq!(seq.observed_count(), 1);
        assert!(ObsSeq::new(values, vec![true, true], 0).is_err());
    }
}
