//! Dense joint-Gaussian oracle for linear Gaussian state-space models.
//!
//! The joint vector is ordered (z_0, z_1, ..., z_T, x_1, ..., x_T). Its
//! moments are assembled by propagating the noise-to-state Jacobian block by
//! block, with no reference to any filtering recursion.

use motionssm::lgssm::LgssmParams;
use nalgebra::{DMatrix, DVector};

pub struct DenseLgssm {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub d_z: usize,
    pub d_x: usize,
    pub t_len: usize,
}

impl DenseLgssm {
    pub fn build(params: &LgssmParams, t_len: usize) -> Self {
        let d_z = params.state_dim();
        let d_x = params.obs_dim();
        let n_z = (t_len + 1) * d_z;
        let n = n_z + t_len * d_x;

        // Mean by straight propagation.
        let mut mean = DVector::zeros(n);
        let mut mu = params.mu0.clone();
        mean.rows_mut(0, d_z).copy_from(&mu);
        for t in 1..=t_len {
            mu = &params.a * mu;
            mean.rows_mut(t * d_z, d_z).copy_from(&mu);
            mean.rows_mut(n_z + (t - 1) * d_x, d_x).copy_from(&(&params.c * &mu));
        }

        // Jacobian of the joint vector with respect to the stacked noise
        // vector (e_0, w_1..w_T, v_1..v_T), plus the block-diagonal noise
        // covariance.
        let mut jac = DMatrix::<f64>::zeros(n, n);
        jac.view_mut((0, 0), (d_z, d_z)).copy_from(&DMatrix::identity(d_z, d_z));
        for t in 1..=t_len {
            let prev = jac.rows((t - 1) * d_z, d_z).clone_owned();
            let mut row = &params.a * prev;
            // w_t enters directly.
            for i in 0..d_z {
                row[(i, t * d_z + i)] += 1.0;
            }
            jac.rows_mut(t * d_z, d_z).copy_from(&row);

            let mut xrow = &params.c * jac.rows(t * d_z, d_z).clone_owned();
            for i in 0..d_x {
                xrow[(i, n_z + (t - 1) * d_x + i)] += 1.0;
            }
            jac.rows_mut(n_z + (t - 1) * d_x, d_x).copy_from(&xrow);
        }

        let mut noise_cov = DMatrix::<f64>::zeros(n, n);
        noise_cov.view_mut((0, 0), (d_z, d_z)).copy_from(&params.sigma0);
        for t in 1..=t_len {
            noise_cov.view_mut((t * d_z, t * d_z), (d_z, d_z)).copy_from(&params.q);
            let o = n_z + (t - 1) * d_x;
            noise_cov.view_mut((o, o), (d_x, d_x)).copy_from(&params.r);
        }

        let cov = &jac * noise_cov * jac.transpose();
        Self { mean, cov, d_z, d_x, t_len }
    }

    /// Flat indices of the z_t block, t in 0..=T.
    pub fn z_block(&self, t: usize) -> Vec<usize> {
        (t * self.d_z..(t + 1) * self.d_z).collect()
    }

    /// Flat indices of the x_t block, t in 1..=T.
    pub fn x_block(&self, t: usize) -> Vec<usize> {
        let start = (self.t_len + 1) * self.d_z + (t - 1) * self.d_x;
        (start..start + self.d_x).collect()
    }

    /// Indices of the observed entries of x for a missing mask over rows
    /// 0..T-1 (row t of the observation matrix is x_{t+1}).
    pub fn observed_indices(&self, mask: &[bool]) -> Vec<usize> {
        let mut idx = Vec::new();
        for (row, &obs) in mask.iter().enumerate() {
            if obs {
                idx.extend(self.x_block(row + 1));
            }
        }
        idx
    }

    /// Log-density of the observed rows under the dense joint, i.e. the model
    /// evidence log p(x_observed). An empty mask yields 0.
    pub fn log_density_of_observed(&self, mask: &[bool], values: &DMatrix<f64>) -> f64 {
        let idx = self.observed_indices(mask);
        if idx.is_empty() {
            return 0.0;
        }
        let (mu, sig) = marginal(&self.mean, &self.cov, &idx);
        let v = stack_observed(values, mask);
        log_density_eigen(&v, &mu, &sig)
    }

    /// Posterior over every remaining coordinate given the observed rows.
    pub fn posterior_given_observed(&self, mask: &[bool], values: &DMatrix<f64>) -> Posterior {
        let obs_idx = self.observed_indices(mask);
        let v = stack_observed(values, mask);
        let (mean, cov, remaining) = condition(&self.mean, &self.cov, &obs_idx, &v);
        Posterior { mean, cov, index_of: remaining }
    }
}

/// Posterior over the coordinates that were not conditioned on. `index_of`
/// maps posterior slots back to flat joint indices.
pub struct Posterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub index_of: Vec<usize>,
}

impl Posterior {
    fn slot(&self, original: usize) -> usize {
        self.index_of
            .iter()
            .position(|&i| i == original)
            .expect("index was conditioned away")
    }

    pub fn mean_of(&self, original: &[usize]) -> DVector<f64> {
        DVector::from_fn(original.len(), |i, _| self.mean[self.slot(original[i])])
    }

    pub fn cov_of(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            self.cov[(self.slot(rows[i]), self.slot(cols[j]))]
        })
    }
}

fn stack_observed(values: &DMatrix<f64>, mask: &[bool]) -> DVector<f64> {
    let mut out = Vec::new();
    for (row, &obs) in mask.iter().enumerate() {
        if obs {
            for j in 0..values.ncols() {
                out.push(values[(row, j)]);
            }
        }
    }
    DVector::from_vec(out)
}

/// Marginal moments of a subset of coordinates.
pub fn marginal(mean: &DVector<f64>, cov: &DMatrix<f64>, idx: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
    let mu = DVector::from_fn(idx.len(), |i, _| mean[idx[i]]);
    let sig = DMatrix::from_fn(idx.len(), idx.len(), |i, j| cov[(idx[i], idx[j])]);
    (mu, sig)
}

/// Condition a joint Gaussian on `obs_idx = obs_vals` by Schur complement.
/// Returns the posterior mean/cov over the remaining coordinates along with
/// their original indices.
pub fn condition(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    obs_idx: &[usize],
    obs_vals: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>, Vec<usize>) {
    let remaining: Vec<usize> = (0..mean.len()).filter(|i| !obs_idx.contains(i)).collect();
    if obs_idx.is_empty() {
        let (mu, sig) = marginal(mean, cov, &remaining);
        return (mu, sig, remaining);
    }
    let (mu_u, sig_uu) = marginal(mean, cov, &remaining);
    let (mu_o, sig_oo) = marginal(mean, cov, obs_idx);
    let sig_uo = DMatrix::from_fn(remaining.len(), obs_idx.len(), |i, j| {
        cov[(remaining[i], obs_idx[j])]
    });
    let inv_oo = eigen_inverse(&sig_oo);
    let gain = &sig_uo * &inv_oo;
    let mean_post = &mu_u + &gain * (obs_vals - &mu_o);
    let cov_post = &sig_uu - &gain * sig_uo.transpose();
    (mean_post, cov_post, remaining)
}

/// Gaussian log-density via eigendecomposition (no Cholesky anywhere).
pub fn log_density_eigen(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let n = x.len();
    let sym = 0.5 * (cov + cov.transpose());
    let eig = sym.symmetric_eigen();
    let mut log_det = 0.0;
    for &lam in eig.eigenvalues.iter() {
        assert!(lam > 0.0, "oracle covariance not positive definite (eigenvalue {lam:e})");
        log_det += lam.ln();
    }
    let diff = x - mean;
    let proj = eig.eigenvectors.transpose() * diff;
    let mut quad = 0.0;
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        quad += proj[i] * proj[i] / lam;
    }
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad)
}

fn eigen_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = 0.5 * (m + m.transpose());
    let eig = sym.symmetric_eigen();
    let mut inv_vals = eig.eigenvalues.clone();
    for v in inv_vals.iter_mut() {
        assert!(*v > 0.0, "oracle matrix not invertible (eigenvalue {:e})", *v);
        *v = 1.0 / *v;
    }
    &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose()
}
