//! Python bindings for the motionssm toolkit.
//!
//! Exposes the temporal model (filtering, smoothing, forecasting,
//! imputation, simulation), parameter learning (offline and online), the
//! deformation operators, the evaluation metrics, and the synthetic
//! phantom through plain lists — no numpy dependency.
//!
//! ```python
//! import motionssm_py as ms
//! params = ms.LgssmParams(a, q, c, r, mu0, sigma0)
//! z, x = ms.simulate(params, steps=100, seed=0)
//! print(ms.kalman_loglik(params, x))
//! ```

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use motionssm::deform::{DeformField, Frame, VelocityField, WarpMode};
use motionssm::learn::{LearnerConfig, OnlineState, ParamVector};
use motionssm::lgssm::{LgssmParams as CoreParams, ObsSeq};
use motionssm::metrics::Mask;
use motionssm::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Numeric(_) | Error::Diverged { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

// ---- list <-> nalgebra conversions ----

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(PyValueError::new_err(format!("{what} must not be empty")));
    }
    let cols = rows[0].len();
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!("{what} rows must be non-empty and equal length")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn obs_from_lists(values: Vec<Vec<f64>>, mask: Option<Vec<bool>>) -> PyResult<ObsSeq> {
    let m = matrix_from_rows(&values, "observations")?;
    match mask {
        Some(flags) => ObsSeq::new(m, flags, 0).map_err(to_py_err),
        None => ObsSeq::fully_observed(m).map_err(to_py_err),
    }
}

fn field_from_lists(field: Vec<Vec<Vec<f64>>>) -> PyResult<(DMatrix<f64>, DMatrix<f64>)> {
    let h = field.len();
    if h == 0 || field[0].is_empty() {
        return Err(PyValueError::new_err("field must be a non-empty H x W x 2 list"));
    }
    let w = field[0].len();
    let mut d0 = DMatrix::zeros(h, w);
    let mut d1 = DMatrix::zeros(h, w);
    for (i, row) in field.iter().enumerate() {
        if row.len() != w {
            return Err(PyValueError::new_err("field rows must have equal length"));
        }
        for (j, v) in row.iter().enumerate() {
            if v.len() != 2 {
                return Err(PyValueError::new_err("field entries must be [d_row, d_col] pairs"));
            }
            d0[(i, j)] = v[0];
            d1[(i, j)] = v[1];
        }
    }
    Ok((d0, d1))
}

fn field_to_lists(d0: &DMatrix<f64>, d1: &DMatrix<f64>) -> Vec<Vec<Vec<f64>>> {
    (0..d0.nrows())
        .map(|i| (0..d0.ncols()).map(|j| vec![d0[(i, j)], d1[(i, j)]]).collect())
        .collect()
}

fn mask_from_lists(mask: &[Vec<bool>], what: &str) -> PyResult<DMatrix<bool>> {
    if mask.is_empty() || mask[0].is_empty() {
        return Err(PyValueError::new_err(format!("{what} must be a non-empty 2D list")));
    }
    let w = mask[0].len();
    if mask.iter().any(|r| r.len() != w) {
        return Err(PyValueError::new_err(format!("{what} rows must have equal length")));
    }
    Ok(DMatrix::from_fn(mask.len(), w, |i, j| mask[i][j]))
}

// ---- parameter wrapper ----

/// Linear Gaussian state-space parameters (A, Q, C, R, mu0, Sigma0).
#[pyclass(name = "LgssmParams")]
#[derive(Clone)]
struct PyLgssmParams {
    inner: CoreParams,
}

#[pymethods]
impl PyLgssmParams {
    #[new]
    fn new(
        a: Vec<Vec<f64>>,
        q: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        r: Vec<Vec<f64>>,
        mu0: Vec<f64>,
        sigma0: Vec<Vec<f64>>,
    ) -> PyResult<Self> {
        let inner = CoreParams::new(
            matrix_from_rows(&a, "A")?,
            matrix_from_rows(&q, "Q")?,
            matrix_from_rows(&c, "C")?,
            matrix_from_rows(&r, "R")?,
            DVector::from_vec(mu0),
            matrix_from_rows(&sigma0, "Sigma0")?,
        )
        .map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// Load from a lgssm-params v1 text file.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(Self { inner: motionssm::io::read_params_file(path).map_err(to_py_err)? })
    }

    fn to_file(&self, path: &str) -> PyResult<()> {
        motionssm::io::write_params_file(path, &self.inner).map_err(to_py_err)
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.inner.a)
    }

    #[getter]
    fn c(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.inner.c)
    }

    fn __repr__(&self) -> String {
        format!("LgssmParams(d_z={}, d_x={})", self.inner.state_dim(), self.inner.obs_dim())
    }
}

// ---- temporal model operations ----

/// Ancestral simulation: returns (latents, observations) as nested lists.
#[pyfunction]
fn simulate(params: &PyLgssmParams, steps: usize, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let (z, x) = motionssm::lgssm::simulate(&params.inner, steps, seed).map_err(to_py_err)?;
    Ok((matrix_to_rows(&z), matrix_to_rows(&x)))
}

/// Exact marginal log-likelihood of the observed rows, in nats.
#[pyfunction]
#[pyo3(signature = (params, values, mask=None))]
fn kalman_loglik(params: &PyLgssmParams, values: Vec<Vec<f64>>, mask: Option<Vec<bool>>) -> PyResult<f64> {
    let obs = obs_from_lists(values, mask)?;
    Ok(motionssm::lgssm::kalman_filter(&params.inner, &obs).map_err(to_py_err)?.loglik)
}

/// Filtered means per step.
#[pyfunction]
#[pyo3(signature = (params, values, mask=None))]
fn filtered_means(
    params: &PyLgssmParams,
    values: Vec<Vec<f64>>,
    mask: Option<Vec<bool>>,
) -> PyResult<Vec<Vec<f64>>> {
    let obs = obs_from_lists(values, mask)?;
    let filt = motionssm::lgssm::kalman_filter(&params.inner, &obs).map_err(to_py_err)?;
    Ok(filt.filtered.iter().map(|g| g.mean.iter().cloned().collect()).collect())
}

/// Smoothed means per step.
#[pyfunction]
#[pyo3(signature = (params, values, mask=None))]
fn smoothed_means(
    params: &PyLgssmParams,
    values: Vec<Vec<f64>>,
    mask: Option<Vec<bool>>,
) -> PyResult<Vec<Vec<f64>>> {
    let obs = obs_from_lists(values, mask)?;
    let filt = motionssm::lgssm::kalman_filter(&params.inner, &obs).map_err(to_py_err)?;
    let smooth = motionssm::lgssm::rts_smooth(&params.inner, &filt).map_err(to_py_err)?;
    Ok(smooth.smoothed.iter().map(|g| g.mean.iter().cloned().collect()).collect())
}

/// Smoothed predictive means over the observations for every step,
/// observed and missing.
#[pyfunction]
#[pyo3(signature = (params, values, mask=None))]
fn impute(
    params: &PyLgssmParams,
    values: Vec<Vec<f64>>,
    mask: Option<Vec<bool>>,
) -> PyResult<Vec<Vec<f64>>> {
    let obs = obs_from_lists(values, mask)?;
    let imputed = motionssm::lgssm::impute(&params.inner, &obs).map_err(to_py_err)?;
    Ok(imputed.iter().map(|g| g.mean.iter().cloned().collect()).collect())
}

/// Forecast k steps past the end of the data: returns (state means,
/// observation means, observation variances).
#[pyfunction]
#[pyo3(signature = (params, values, k, mask=None))]
fn forecast(
    params: &PyLgssmParams,
    values: Vec<Vec<f64>>,
    k: usize,
    mask: Option<Vec<bool>>,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let obs = obs_from_lists(values, mask)?;
    let filt = motionssm::lgssm::kalman_filter(&params.inner, &obs).map_err(to_py_err)?;
    let fc = motionssm::lgssm::forecast(&params.inner, filt.filtered.last().unwrap(), k)
        .map_err(to_py_err)?;
    let means_z = fc.states.iter().map(|g| g.mean.iter().cloned().collect()).collect();
    let means_x = fc.observations.iter().map(|g| g.mean.iter().cloned().collect()).collect();
    let vars_x = fc
        .observations
        .iter()
        .map(|g| (0..g.dim()).map(|i| g.cov[(i, i)]).collect())
        .collect();
    Ok((means_z, means_x, vars_x))
}

/// Exact predictive log-density of the future block given the past, plus
/// the RMSE of the deterministic forecast means.
#[pyfunction]
fn evaluate_forecast(
    params: &PyLgssmParams,
    past: Vec<Vec<f64>>,
    future: Vec<Vec<f64>>,
) -> PyResult<(f64, f64)> {
    let past = obs_from_lists(past, None)?;
    let future = obs_from_lists(future, None)?;
    let ev = motionssm::learn::evaluate_forecast(&params.inner, &past, &future).map_err(to_py_err)?;
    Ok((ev.loglik, ev.rmse))
}

/// Offline maximum-likelihood fit; returns the improved parameters.
#[pyfunction]
#[pyo3(signature = (params, sequences, learning_rate=5e-4, iters=200, seed=0))]
fn fit_offline(
    params: &PyLgssmParams,
    sequences: Vec<Vec<Vec<f64>>>,
    learning_rate: f64,
    iters: usize,
    seed: u64,
) -> PyResult<PyLgssmParams> {
    let dataset: Vec<ObsSeq> =
        sequences.into_iter().map(|s| obs_from_lists(s, None)).collect::<PyResult<_>>()?;
    let init = ParamVector::from_lgssm(&params.inner).map_err(to_py_err)?;
    let cfg = LearnerConfig { learning_rate, max_iters: iters, seed, ..Default::default() };
    let fit = motionssm::learn::fit_offline(&init, &dataset, &cfg).map_err(to_py_err)?;
    Ok(PyLgssmParams { inner: fit.params.unpack().map_err(to_py_err)?.lgssm })
}

/// Streaming moving-horizon learner.
#[pyclass(name = "OnlineLearner")]
struct PyOnlineLearner {
    state: OnlineState,
}

#[pymethods]
impl PyOnlineLearner {
    #[new]
    #[pyo3(signature = (params, horizon=75, learning_rate=5e-4, inner_steps=1))]
    fn new(
        params: &PyLgssmParams,
        horizon: usize,
        learning_rate: f64,
        inner_steps: usize,
    ) -> PyResult<Self> {
        let pv = ParamVector::from_lgssm(&params.inner).map_err(to_py_err)?;
        let cfg = LearnerConfig {
            learning_rate,
            horizon,
            inner_steps_per_sample: inner_steps,
            ..Default::default()
        };
        Ok(Self { state: OnlineState::new(pv, cfg).map_err(to_py_err)? })
    }

    /// Push one observation and adapt on the buffered window.
    fn step(&mut self, observation: Vec<f64>) -> PyResult<()> {
        self.state.step(&DVector::from_vec(observation)).map_err(to_py_err)
    }

    /// Current (adapted) parameters.
    fn params(&self) -> PyResult<PyLgssmParams> {
        Ok(PyLgssmParams { inner: self.state.params().unpack().map_err(to_py_err)?.lgssm })
    }

    #[getter]
    fn window_len(&self) -> usize {
        self.state.window_len()
    }

    /// Window log-likelihood recorded at each processed sample.
    fn loglik_log(&self) -> Vec<f64> {
        self.state.loglik_log().to_vec()
    }
}

// ---- deformation operators ----

/// Gaussian-smooth an H x W x 2 velocity field.
#[pyfunction]
fn gaussian_smooth(field: Vec<Vec<Vec<f64>>>, sigma: f64) -> PyResult<Vec<Vec<Vec<f64>>>> {
    let (d0, d1) = field_from_lists(field)?;
    let v = VelocityField::new(d0, d1).map_err(to_py_err)?;
    let s = motionssm::deform::gaussian_smooth(&v, sigma).map_err(to_py_err)?;
    Ok(field_to_lists(s.component(0), s.component(1)))
}

/// Exponentiate a stationary velocity field by scaling and squaring.
#[pyfunction]
#[pyo3(signature = (field, squarings=4))]
fn exp_svf(field: Vec<Vec<Vec<f64>>>, squarings: u32) -> PyResult<Vec<Vec<Vec<f64>>>> {
    let (d0, d1) = field_from_lists(field)?;
    let v = VelocityField::new(d0, d1).map_err(to_py_err)?;
    let phi = motionssm::deform::exp_svf(&v, squarings);
    Ok(field_to_lists(phi.displacement(0), phi.displacement(1)))
}

/// Warp an image through a deformation field ("bilinear" or "nearest").
#[pyfunction]
#[pyo3(signature = (image, field, mode="bilinear"))]
fn warp(image: Vec<Vec<f64>>, field: Vec<Vec<Vec<f64>>>, mode: &str) -> PyResult<Vec<Vec<f64>>> {
    let img = Frame::new(matrix_from_rows(&image, "image")?).map_err(to_py_err)?;
    let (d0, d1) = field_from_lists(field)?;
    let phi = DeformField::from_displacement(d0, d1).map_err(to_py_err)?;
    let mode = match mode {
        "bilinear" => WarpMode::Bilinear,
        "nearest" => WarpMode::Nearest,
        other => return Err(PyValueError::new_err(format!("unknown warp mode \"{other}\""))),
    };
    let out = motionssm::deform::warp(&img, &phi, mode).map_err(to_py_err)?;
    Ok(matrix_to_rows(&out.data))
}

/// Per-pixel Jacobian determinant of a deformation field.
#[pyfunction]
fn jacobian_det(field: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<Vec<f64>>> {
    let (d0, d1) = field_from_lists(field)?;
    let phi = DeformField::from_displacement(d0, d1).map_err(to_py_err)?;
    let det = motionssm::deform::jacobian_det(&phi).map_err(to_py_err)?;
    Ok(matrix_to_rows(&det))
}

// ---- metrics ----

#[pyfunction]
fn dice(a: Vec<Vec<bool>>, b: Vec<Vec<bool>>) -> PyResult<f64> {
    let am = Mask::new(mask_from_lists(&a, "a")?);
    let bm = Mask::new(mask_from_lists(&b, "b")?);
    motionssm::metrics::dice(&am, &bm).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (a, b, spacing=(1.0, 1.0)))]
fn hd95(a: Vec<Vec<bool>>, b: Vec<Vec<bool>>, spacing: (f64, f64)) -> PyResult<f64> {
    let am = Mask::with_spacing(mask_from_lists(&a, "a")?, spacing).map_err(to_py_err)?;
    let bm = Mask::with_spacing(mask_from_lists(&b, "b")?, spacing).map_err(to_py_err)?;
    motionssm::metrics::hd95(&am, &bm).map_err(to_py_err)
}

#[pyfunction]
fn rmse(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<f64> {
    motionssm::metrics::rmse(&matrix_from_rows(&a, "a")?, &matrix_from_rows(&b, "b")?)
        .map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (a, b, window=9))]
fn lcc(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, window: usize) -> PyResult<f64> {
    let fa = Frame::new(matrix_from_rows(&a, "a")?).map_err(to_py_err)?;
    let fb = Frame::new(matrix_from_rows(&b, "b")?).map_err(to_py_err)?;
    motionssm::metrics::lcc(&fa, &fb, window).map_err(to_py_err)
}

// ---- synthetic phantom ----

/// Synthetic cardiac-like reference image; returns (image, labels) with
/// labels 0 = background, 1 = ring, 2 = interior.
#[pyfunction]
fn make_phantom(height: usize, width: usize, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<u8>>)> {
    let f = motionssm::synth::make_phantom(height, width, seed).map_err(to_py_err)?;
    let label = f.label.as_ref().expect("phantom carries labels");
    let labels =
        (0..label.nrows()).map(|i| (0..label.ncols()).map(|j| label[(i, j)]).collect()).collect();
    Ok((matrix_to_rows(&f.data), labels))
}

#[pymodule]
fn motionssm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLgssmParams>()?;
    m.add_class::<PyOnlineLearner>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(kalman_loglik, m)?)?;
    m.add_function(wrap_pyfunction!(filtered_means, m)?)?;
    m.add_function(wrap_pyfunction!(smoothed_means, m)?)?;
    m.add_function(wrap_pyfunction!(impute, m)?)?;
    m.add_function(wrap_pyfunction!(forecast, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_forecast, m)?)?;
    m.add_function(wrap_pyfunction!(fit_offline, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_smooth, m)?)?;
    m.add_function(wrap_pyfunction!(exp_svf, m)?)?;
    m.add_function(wrap_pyfunction!(warp, m)?)?;
    m.add_function(wrap_pyfunction!(jacobian_det, m)?)?;
    m.add_function(wrap_pyfunction!(dice, m)?)?;
    m.add_function(wrap_pyfunction!(hd95, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(lcc, m)?)?;
    m.add_function(wrap_pyfunction!(make_phantom, m)?)?;
    Ok(())
}
