//! Nested-loop re-implementations of the evaluation metrics and field
//! operators, used as oracles. Conventions (boundary definition, percentile
//! interpolation, reflect padding, valid-region averaging) match the
//! documented design decisions; the code paths share nothing else.

use nalgebra::DMatrix;

/// 95th-percentile symmetric Hausdorff distance over 8-connectivity boundary
/// pixels, spacing-scaled, exhaustive all-pairs search.
pub fn hd95_naive(a: &DMatrix<bool>, b: &DMatrix<bool>, spacing: (f64, f64)) -> f64 {
    let ba = boundary(a);
    let bb = boundary(b);
    assert!(!ba.is_empty() && !bb.is_empty(), "oracle requires non-empty masks");
    let d_ab = directed(&ba, &bb, spacing);
    let d_ba = directed(&bb, &ba, spacing);
    percentile95(d_ab).max(percentile95(d_ba))
}

/// Exact symmetric Hausdorff distance (maximum instead of percentile).
pub fn hausdorff_exact_naive(a: &DMatrix<bool>, b: &DMatrix<bool>, spacing: (f64, f64)) -> f64 {
    let ba = boundary(a);
    let bb = boundary(b);
    let max = |v: Vec<f64>| v.into_iter().fold(0.0f64, f64::max);
    max(directed(&ba, &bb, spacing)).max(max(directed(&bb, &ba, spacing)))
}

fn boundary(m: &DMatrix<bool>) -> Vec<(usize, usize)> {
    let (h, w) = m.shape();
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !m[(r, c)] {
                continue;
            }
            let mut edge = false;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let rr = r as i64 + dr;
                    let cc = c as i64 + dc;
                    if rr < 0 || rr >= h as i64 || cc < 0 || cc >= w as i64 {
                        edge = true;
                    } else if !m[(rr as usize, cc as usize)] {
                        edge = true;
                    }
                }
            }
            if edge {
                out.push((r, c));
            }
        }
    }
    out
}

fn directed(from: &[(usize, usize)], to: &[(usize, usize)], spacing: (f64, f64)) -> Vec<f64> {
    from.iter()
        .map(|&(r, c)| {
            let mut best = f64::INFINITY;
            for &(r2, c2) in to {
                let dr = (r as f64 - r2 as f64) * spacing.0;
                let dc = (c as f64 - c2 as f64) * spacing.1;
                let d = (dr * dr + dc * dc).sqrt();
                if d < best {
                    best = d;
                }
            }
            best
        })
        .collect()
}

fn percentile95(mut v: Vec<f64>) -> f64 {
    // Selection sort; small inputs only.
    for i in 0..v.len() {
        let mut min = i;
        for j in (i + 1)..v.len() {
            if v[j] < v[min] {
                min = j;
            }
        }
        v.swap(i, min);
    }
    let rank = 0.95 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (rank - lo as f64) * (v[hi] - v[lo])
    }
}

/// Mean squared local normalized cross-correlation over all fully-contained
/// windows, every moment recomputed per window.
pub fn lcc_naive(a: &DMatrix<f64>, b: &DMatrix<f64>, window: usize, eps: f64) -> f64 {
    let (h, w) = a.shape();
    let half = window / 2;
    let n = (window * window) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for r in half..h - half {
        for c in half..w - half {
            let mut sa = 0.0;
            let mut sb = 0.0;
            for i in r - half..=r + half {
                for j in c - half..=c + half {
                    sa += a[(i, j)];
                    sb += b[(i, j)];
                }
            }
            let ma = sa / n;
            let mb = sb / n;
            let mut cross = 0.0;
            let mut va = 0.0;
            let mut vb = 0.0;
            for i in r - half..=r + half {
                for j in c - half..=c + half {
                    let da = a[(i, j)] - ma;
                    let db = b[(i, j)] - mb;
                    cross += da * db;
                    va += da * da;
                    vb += db * db;
                }
            }
            total += cross * cross / (va * vb + eps);
            count += 1;
        }
    }
    total / count as f64
}

/// Dense 2D Gaussian convolution with reflect padding, kernel radius
/// ceil(3 sigma), kernel renormalized to sum one.
pub fn gaussian_conv2_naive(img: &DMatrix<f64>, sigma: f64) -> DMatrix<f64> {
    if sigma == 0.0 {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k1 = Vec::new();
    for i in -radius..=radius {
        k1.push((-((i * i) as f64) / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = k1.iter().sum();
    for v in k1.iter_mut() {
        *v /= sum;
    }

    let (h, w) = img.shape();
    let reflect = |idx: i64, n: usize| -> usize {
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
    };

    let mut out = DMatrix::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (ki, dr) in (-radius..=radius).enumerate() {
                for (kj, dc) in (-radius..=radius).enumerate() {
                    let rr = reflect(r as i64 + dr, h);
                    let cc = reflect(c as i64 + dc, w);
                    acc += k1[ki] * k1[kj] * img[(rr, cc)];
                }
            }
            out[(r, c)] = acc;
        }
    }
    out
}

/// Jacobian determinant of phi(x) = x + u(x) by explicit finite-difference
/// loops: central in the interior, one-sided at the borders. Components are
/// (axis-0, axis-1) displacements.
pub fn jacdet_naive(d0: &DMatrix<f64>, d1: &DMatrix<f64>) -> DMatrix<f64> {
    let (h, w) = d0.shape();
    let diff = |m: &DMatrix<f64>, r: usize, c: usize, axis: usize| -> f64 {
        let (n, get): (usize, Box<dyn Fn(usize) -> f64>) = if axis == 0 {
            (h, Box::new(move |i| m[(i, c)]))
        } else {
            (w, Box::new(move |j| m[(r, j)]))
        };
        let pos = if axis == 0 { r } else { c };
        if pos == 0 {
            get(1) - get(0)
        } else if pos == n - 1 {
            get(n - 1) - get(n - 2)
        } else {
            (get(pos + 1) - get(pos - 1)) / 2.0
        }
    };
    let mut out = DMatrix::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let j00 = 1.0 + diff(d0, r, c, 0);
            let j01 = diff(d0, r, c, 1);
            let j10 = diff(d1, r, c, 0);
            let j11 = 1.0 + diff(d1, r, c, 1);
            out[(r, c)] = j00 * j11 - j01 * j10;
        }
    }
    out
}
