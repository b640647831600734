//! Small order-statistics helpers shared by metrics and experiment reports.

/// Percentile with linear interpolation between order statistics (the
/// "linear" convention: rank = p/100 * (n-1)).
///
/// `sorted` must be ascending and non-empty; `p` in [0, 100].
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    assert!((0.0..=100.0).contains(&p), "percentile out of range");
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = rank - lo as f64;
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in percentile input"));
    percentile_sorted(&v, p)
}

pub fn median(values: &[f64]) -> f64 {
    percentile(values, 50.0)
}

/// (25th, 75th) percentiles.
pub fn quartiles(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in quartile input"));
    (percentile_sorted(&v, 25.0), percentile_sorted(&v, 75.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_is_every_percentile() {
        assert_eq!(percentile(&[3.0], 0.0), 3.0);
        assert_eq!(percentile(&[3.0], 95.0), 3.0);
        assert_eq!(percentile(&[3.0], 100.0), 3.0);
    }

    #[test]
    fn median_interpolates_even_counts() {
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn linear_interpolation_matches_hand_value() {
        // rank = 0.95 * 3 = 2.85 between 3.0 and 4.0
        assert!((percentile(&[1.0, 2.0, 3.0, 4.0], 95.0) - 3.85).abs() < 1e-12);
    }
}
