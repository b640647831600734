use super::field::{DeformField, Field2, VelocityField};
use crate::error::{Error, Result};

/// Exponentiate a stationary velocity field by scaling and squaring:
/// u <- v / 2^n, then n self-compositions u <- u + u o (id + u) with
/// bilinear sampling. Four squarings are the pipeline default.
pub fn exp_svf(v: &VelocityField, n_squarings: u32) -> DeformField {
    let scale = 1.0 / f64::powi(2.0, n_squarings as i32);
    let mut u = DeformField(Field2 { d0: &v.0.d0 * scale, d1: &v.0.d1 * scale });
    for _ in 0..n_squarings {
        u = self_compose(&u);
    }
    u
}

fn self_compose(u: &DeformField) -> DeformField {
    compose(u, u).expect("self-composition shapes always match")
}

/// phi_a o phi_b: resamples phi_a's displacement at phi_b's targets, so the
/// result maps x to phi_a(phi_b(x)).
pub fn compose(phi_a: &DeformField, phi_b: &DeformField) -> Result<DeformField> {
    if phi_a.shape() != phi_b.shape() {
        return Err(Error::Dim("deformation fields must share a shape".into()));
    }
    let (h, w) = phi_b.shape();
    let mut d0 = phi_b.0.d0.clone();
    let mut d1 = phi_b.0.d1.clone();
    for r in 0..h {
        for c in 0..w {
            let tr = r as f64 + phi_b.0.d0[(r, c)];
            let tc = c as f64 + phi_b.0.d1[(r, c)];
            let (a0, a1) = phi_a.0.sample_clamped(tr, tc);
            d0[(r, c)] += a0;
            d1[(r, c)] += a1;
        }
    }
    Ok(DeformField(Field2 { d0, d1 }))
}
