use nalgebra::DMatrix;

use super::field::DeformField;
use crate::error::{Error, Result};

/// Per-pixel determinant of the Jacobian of phi(x) = x + u(x): central
/// differences in the interior, one-sided at the borders. Strictly positive
/// values everywhere certify a locally invertible (diffeomorphic) map.
pub fn jacobian_det(phi: &DeformField) -> Result<DMatrix<f64>> {
    let (h, w) = phi.shape();
    if h < 3 || w < 3 {
        return Err(Error::Precondition("jacobian determinant needs at least a 3x3 grid".into()));
    }
    let d0 = &phi.0.d0;
    let d1 = &phi.0.d1;
    let mut out = DMatrix::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let j00 = 1.0 + diff_axis0(d0, r, c);
            let j01 = diff_axis1(d0, r, c);
            let j10 = diff_axis0(d1, r, c);
            let j11 = 1.0 + diff_axis1(d1, r, c);
            out[(r, c)] = j00 * j11 - j01 * j10;
        }
    }
    Ok(out)
}

fn diff_axis0(m: &DMatrix<f64>, r: usize, c: usize) -> f64 {
    let h = m.nrows();
    if r == 0 {
        m[(1, c)] - m[(0, c)]
    } else if r == h - 1 {
        m[(h - 1, c)] - m[(h - 2, c)]
    } else {
        0.5 * (m[(r + 1, c)] - m[(r - 1, c)])
    }
}

fn diff_axis1(m: &DMatrix<f64>, r: usize, c: usize) -> f64 {
    let w = m.ncols();
    if c == 0 {
        m[(r, 1)] - m[(r, 0)]
    } else if c == w - 1 {
        m[(r, w - 1)] - m[(r, w - 2)]
    } else {
        0.5 * (m[(r, c + 1)] - m[(r, c - 1)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_unit_determinant_everywhere() {
        let det = jacobian_det(&DeformField::identity(6, 9)).unwrap();
        for v in det.iter() {
            assert_eq!(*v, 1.0);
        }
    }

    #[test]
    fn uniform_scaling_gives_the_squared_factor() {
        // phi(x) = 1.1 x means u(x) = 0.1 x; central differences are exact
        // on affine maps.
        let phi = DeformField::from_displacement(
            DMatrix::from_fn(16, 16, |r, _| 0.1 * r as f64),
            DMatrix::from_fn(16, 16, |_, c| 0.1 * c as f64),
        )
        .unwrap();
        let det = jacobian_det(&phi).unwrap();
        for r in 1..15 {
            for c in 1..15 {
                assert!((det[(r, c)] - 1.21).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn tiny_grids_are_rejected() {
        assert!(jacobian_det(&DeformField::identity(2, 5)).is_err());
    }
}
