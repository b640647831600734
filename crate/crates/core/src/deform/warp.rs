use nalgebra::DMatrix;

use super::field::{DeformField, Frame};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarpMode {
    Bilinear,
    Nearest,
}

/// Resample an image through a deformation: output(x) = img(phi(x)).
/// Out-of-domain samples clamp to the border pixel. A label mask attached to
/// the frame is always warped with nearest-neighbor sampling.
pub fn warp(img: &Frame, phi: &DeformField, mode: WarpMode) -> Result<Frame> {
    if img.shape() != phi.shape() {
        return Err(Error::Dim(format!(
            "image is {:?} but the deformation is {:?}",
            img.shape(),
            phi.shape()
        )));
    }
    let (h, w) = img.shape();
    let mut out = DMatrix::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let sr = r as f64 + phi.0.d0[(r, c)];
            let sc = c as f64 + phi.0.d1[(r, c)];
            out[(r, c)] = match mode {
                WarpMode::Bilinear => sample_bilinear(&img.data, sr, sc),
                WarpMode::Nearest => sample_nearest(&img.data, sr, sc),
            };
        }
    }
    let mut frame = Frame::new(out)?;
    if let Some(label) = &img.label {
        let mut warped = DMatrix::zeros(h, w);
        for r in 0..h {
            for c in 0..w {
                let sr = r as f64 + phi.0.d0[(r, c)];
                let sc = c as f64 + phi.0.d1[(r, c)];
                warped[(r, c)] = nearest_of(label, sr, sc);
            }
        }
        frame.label = Some(warped);
    }
    Ok(frame)
}

fn sample_bilinear(m: &DMatrix<f64>, r: f64, c: f64) -> f64 {
    let (h, w) = m.shape();
    let r = r.clamp(0.0, (h - 1) as f64);
    let c = c.clamp(0.0, (w - 1) as f64);
    let r0 = r.floor() as usize;
    let c0 = c.floor() as usize;
    let r1 = (r0 + 1).min(h - 1);
    let c1 = (c0 + 1).min(w - 1);
    let fr = r - r0 as f64;
    let fc = c - c0 as f64;
    (1.0 - fr) * (1.0 - fc) * m[(r0, c0)]
        + (1.0 - fr) * fc * m[(r0, c1)]
        + fr * (1.0 - fc) * m[(r1, c0)]
        + fr * fc * m[(r1, c1)]
}

fn sample_nearest(m: &DMatrix<f64>, r: f64, c: f64) -> f64 {
    let (h, w) = m.shape();
    let rr = r.round().clamp(0.0, (h - 1) as f64) as usize;
    let cc = c.round().clamp(0.0, (w - 1) as f64) as usize;
    m[(rr, cc)]
}

fn nearest_of(m: &DMatrix<u8>, r: f64, c: f64) -> u8 {
    let (h, w) = m.shape();
    let rr = r.round().clamp(0.0, (h - 1) as f64) as usize;
    let cc = c.round().clamp(0.0, (w - 1) as f64) as usize;
    m[(rr, cc)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deform::{exp_svf, DeformField, VelocityField};

    #[test]
    fn identity_warp_is_bit_exact() {
        let img = Frame::new(DMatrix::from_fn(16, 16, |r, c| (r * 31 + c) as f64 * 0.37)).unwrap();
        let out = warp(&img, &DeformField::identity(16, 16), WarpMode::Bilinear).unwrap();
        assert_eq!(out.data, img.data);
    }

    #[test]
    fn integer_row_displacement_shifts_and_duplicates_the_border_row() {
        let img = Frame::new(DMatrix::from_fn(4, 3, |r, _| r as f64)).unwrap();
        let phi = DeformField::from_displacement(
            DMatrix::from_element(4, 3, 1.0),
            DMatrix::zeros(4, 3),
        )
        .unwrap();
        let out = warp(&img, &phi, WarpMode::Bilinear).unwrap();
        // Row r samples row r+1; the last row clamps to itself.
        for c in 0..3 {
            assert_eq!(out.data[(0, c)], 1.0);
            assert_eq!(out.data[(1, c)], 2.0);
            assert_eq!(out.data[(2, c)], 3.0);
            assert_eq!(out.data[(3, c)], 3.0);
        }
    }

    #[test]
    fn half_pixel_shift_is_exact_on_a_linear_ramp() {
        let img = Frame::new(DMatrix::from_fn(8, 8, |r, _| r as f64)).unwrap();
        let phi = DeformField::from_displacement(
            DMatrix::from_element(8, 8, 0.5),
            DMatrix::zeros(8, 8),
        )
        .unwrap();
        let out = warp(&img, &phi, WarpMode::Bilinear).unwrap();
        for r in 1..6 {
            for c in 0..8 {
                assert!((out.data[(r, c)] - (r as f64 + 0.5)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_images_are_preserved_by_any_deformation() {
        let img = Frame::new(DMatrix::from_element(12, 12, 3.25)).unwrap();
        let v = VelocityField::new(
            DMatrix::from_fn(12, 12, |r, c| ((r * c) as f64 * 0.7).sin()),
            DMatrix::from_fn(12, 12, |r, c| ((r + 2 * c) as f64 * 0.3).cos()),
        )
        .unwrap();
        let phi = exp_svf(&v, 4);
        let out = warp(&img, &phi, WarpMode::Bilinear).unwrap();
        for v in out.data.iter() {
            assert!((v - 3.25).abs() < 1e-12);
        }
    }

    #[test]
    fn labels_are_warped_with_nearest_neighbor() {
        let mut label = DMatrix::zeros(4, 4);
        label[(2, 2)] = 7u8;
        let img = Frame::with_label(DMatrix::zeros(4, 4), label).unwrap();
        let phi = DeformField::from_displacement(
            DMatrix::from_element(4, 4, 0.4),
            DMatrix::from_element(4, 4, 0.4),
        )
        .unwrap();
        let out = warp(&img, &phi, WarpMode::Bilinear).unwrap();
        // (2,2) + 0.4 rounds back to (2,2); (1,1) + 0.4 rounds to (1,1).
        assert_eq!(out.label.as_ref().unwrap()[(2, 2)], 7);
        assert_eq!(out.label.as_ref().unwrap()[(1, 1)], 0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let img = Frame::new(DMatrix::zeros(4, 4)).unwrap();
        let phi = DeformField::identity(5, 5);
        assert!(warp(&img, &phi, WarpMode::Bilinear).is_err());
    }
}
