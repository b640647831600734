//! Evaluation measures: Dice score coefficient, 95th-percentile Hausdorff
//! distance over mask boundaries, RMSE, and squared local normalized
//! cross-correlation used as a similarity score.

use nalgebra::DMatrix;

use crate::deform::Frame;
use crate::error::{Error, Result};
use crate::stats::percentile_sorted;

/// Binary segmentation mask with physical pixel spacing in mm per axis
/// (axis 0 = rows, axis 1 = columns); spacing defaults to 1.0 when
/// unspecified, in which case distances are in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    data: DMatrix<bool>,
    spacing: (f64, f64),
}

impl Mask {
    pub fn new(data: DMatrix<bool>) -> Self {
        Self { data, spacing: (1.0, 1.0) }
    }

    pub fn with_spacing(data: DMatrix<bool>, spacing: (f64, f64)) -> Result<Self> {
        if !(spacing.0 > 0.0 && spacing.1 > 0.0) {
            return Err(Error::Invalid("pixel spacing must be positive".into()));
        }
        Ok(Self { data, spacing })
    }

    pub fn from_label(label: &DMatrix<u8>, value: u8) -> Self {
        Self::new(label.map(|v| v == value))
    }

    pub fn data(&self) -> &DMatrix<bool> {
        &self.data
    }

    pub fn spacing(&self) -> (f64, f64) {
        self.spacing
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }
}

/// Dice score 2|a n b| / (|a| + |b|). Two empty masks agree vacuously and
/// score 1.0; one empty mask scores 0.0.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dim("dice requires equal mask shapes".into()));
    }
    let mut inter = 0usize;
    let mut total = 0usize;
    for (&x, &y) in a.data.iter().zip(b.data.iter()) {
        inter += (x && y) as usize;
        total += x as usize + y as usize;
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Symmetric 95th-percentile Hausdorff distance between mask boundaries:
/// the maximum of the two directed 95th-percentile nearest-boundary
/// distances, percentiles linearly interpolated, distances scaled by the
/// pixel spacing. Boundaries use 8-connectivity (pixels at the image edge
/// count as boundary).
pub fn hd95(a: &Mask, b: &Mask) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dim("hd95 requires equal mask shapes".into()));
    }
    if a.spacing != b.spacing {
        return Err(Error::Invalid("hd95 requires equal pixel spacing".into()));
    }
    if a.count() == 0 || b.count() == 0 {
        return Err(Error::Precondition("hd95 requires non-empty masks".into()));
    }
    let ba = boundary_pixels(&a.data);
    let bb = boundary_pixels(&b.data);
    let d_ab = directed_nearest(&ba, &bb, a.spacing);
    let d_ba = directed_nearest(&bb, &ba, a.spacing);
    Ok(percentile95(d_ab).max(percentile95(d_ba)))
}

fn percentile95(mut distances: Vec<f64>) -> f64 {
    distances.sort_by(|x, y| x.partial_cmp(y).expect("finite distances"));
    percentile_sorted(&distances, 95.0)
}

fn boundary_pixels(m: &DMatrix<bool>) -> Vec<(i64, i64)> {
    let (h, w) = m.shape();
    let mut out = Vec::new();
    for r in 0..h as i64 {
        for c in 0..w as i64 {
            if !m[(r as usize, c as usize)] {
                continue;
            }
            let mut is_boundary = false;
            'scan: for dr in -1..=1i64 {
                for dc in -1..=1i64 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || rr >= h as i64 || cc < 0 || cc >= w as i64 {
                        is_boundary = true;
                        break 'scan;
                    }
                    if !m[(rr as usize, cc as usize)] {
                        is_boundary = true;
                        break 'scan;
                    }
                }
            }
            if is_boundary {
                out.push((r, c));
            }
        }
    }
    out
}

fn directed_nearest(from: &[(i64, i64)], to: &[(i64, i64)], spacing: (f64, f64)) -> Vec<f64> {
    from.iter()
        .map(|&(r, c)| {
            let mut best = f64::INFINITY;
            for &(r2, c2) in to {
                let dr = (r - r2) as f64 * spacing.0;
                let dc = (c - c2) as f64 * spacing.1;
                let d2 = dr * dr + dc * dc;
                if d2 < best {
                    best = d2;
                    if best == 0.0 {
                        break;
                    }
                }
            }
            best.sqrt()
        })
        .collect()
}

/// Root of the mean squared elementwise difference.
pub fn rmse(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dim("rmse requires equal shapes".into()));
    }
    let n = (a.nrows() * a.ncols()) as f64;
    let sq: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sq / n).sqrt())
}

const LCC_EPS: f64 = 1e-5;

/// Mean over all fully contained windows of the squared local normalized
/// cross-correlation, cc = cross^2 / (var_a * var_b + 1e-5). A similarity
/// score in [0, 1]; affine intensity changes leave it essentially unchanged.
///
/// Implemented with summed-area tables after centering each image by its
/// global mean; the naive per-window definition is the test oracle.
pub fn lcc(a: &Frame, b: &Frame, window: usize) -> Result<f64> {
    let (h, w) = a.shape();
    if (h, w) != b.shape() {
        return Err(Error::Dim("lcc requires equal frame shapes".into()));
    }
    if window % 2 == 0 || window == 0 {
        return Err(Error::Precondition("lcc window must be odd".into()));
    }
    if window > h.min(w) {
        return Err(Error::Precondition("lcc window exceeds the image".into()));
    }

    let shift_a = a.data.sum() / (h * w) as f64;
    let shift_b = b.data.sum() / (h * w) as f64;
    let ac = a.data.map(|v| v - shift_a);
    let bc = b.data.map(|v| v - shift_b);

    let sat_a = integral(&ac);
    let sat_b = integral(&bc);
    let sat_aa = integral(&ac.component_mul(&ac));
    let sat_bb = integral(&bc.component_mul(&bc));
    let sat_ab = integral(&ac.component_mul(&bc));

    let n = (window * window) as f64;
    let half = window / 2;
    let mut total = 0.0;
    let mut count = 0usize;
    for r in half..h - half {
        for c in half..w - half {
            let (r0, c0, r1, c1) = (r - half, c - half, r + half, c + half);
            let sa = box_sum(&sat_a, r0, c0, r1, c1);
            let sb = box_sum(&sat_b, r0, c0, r1, c1);
            let saa = box_sum(&sat_aa, r0, c0, r1, c1);
            let sbb = box_sum(&sat_bb, r0, c0, r1, c1);
            let sab = box_sum(&sat_ab, r0, c0, r1, c1);
            let cross = sab - sa * sb / n;
            let va = saa - sa * sa / n;
            let vb = sbb - sb * sb / n;
            total += cross * cross / (va * vb + LCC_EPS);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Inclusive summed-area table with a zero row/column prefix.
fn integral(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (h, w) = m.shape();
    let mut s = DMatrix::zeros(h + 1, w + 1);
    for r in 0..h {
        for c in 0..w {
            s[(r + 1, c + 1)] = m[(r, c)] + s[(r, c + 1)] + s[(r + 1, c)] - s[(r, c)];
        }
    }
    s
}

fn box_sum(s: &DMatrix<f64>, r0: usize, c0: usize, r1: usize, c1: usize) -> f64 {
    s[(r1 + 1, c1 + 1)] - s[(r0, c1 + 1)] - s[(r1 + 1, c0)] + s[(r0, c0)]
}
