use nalgebra::DMatrix;

use super::field::{Field2, VelocityField};
use crate::error::{Error, Result};

/// Separable discrete Gaussian convolution of each component with kernel
/// radius ceil(3 sigma), the kernel renormalized to sum one, and reflect
/// padding at the borders. `sigma = 0` returns the input unchanged.
pub fn gaussian_smooth(v: &VelocityField, sigma: f64) -> Result<VelocityField> {
    if !(sigma >= 0.0) {
        return Err(Error::Precondition(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(v.clone());
    }
    let kernel = normalized_kernel(sigma);
    Ok(VelocityField(Field2 {
        d0: convolve_separable(&v.0.d0, &kernel),
        d1: convolve_separable(&v.0.d1, &kernel),
    }))
}

pub(crate) fn normalized_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> =
        (-radius..=radius).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    for v in k.iter_mut() {
        *v /= sum;
    }
    k
}

fn convolve_separable(m: &DMatrix<f64>, kernel: &[f64]) -> DMatrix<f64> {
    let along_rows = convolve_axis(m, kernel, 0);
    convolve_axis(&along_rows, kernel, 1)
}

/// Reflect padding in the scipy sense: index -1 maps to 0, -2 to 1, n to
/// n-1, folding repeatedly for very wide kernels.
fn reflect(idx: i64, n: usize) -> usize {
    let n = n as i64;
    let mut i = idx;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

fn convolve_axis(m: &DMatrix<f64>, kernel: &[f64], axis: usize) -> DMatrix<f64> {
    let (h, w) = m.shape();
    let radius = (kernel.len() / 2) as i64;
    let mut out = DMatrix::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (ki, off) in (-radius..=radius).enumerate() {
                let src = if axis == 0 {
                    m[(reflect(r as i64 + off, h), c)]
                } else {
                    m[(r, reflect(c as i64 + off, w))]
                };
                acc += kernel[ki] * src;
            }
            out[(r, c)] = acc;
        }
    }
    out
}
