//! Descriptive helpers shared across estimators.

/// Two-sided 95% normal critical value.
pub const Z_975: f64 = 1.959964;

pub fn expit(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Arithmetic mean; NaN for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n − 1) sample variance; NaN with fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// Quantile of already-sorted data with linear interpolation between
/// order statistics (Hyndman–Fan type 7, the R/NumPy default).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    assert!((0.0..=1.0).contains(&q), "quantile level outside [0, 1]");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Type-7 quantile of unsorted data.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expit_values() {
        assert_eq!(expit(0.0), 0.5);
        assert!((expit(0.8) - 0.689_974_481_127_612_8).abs() < 1e-15);
        assert!((expit(-800.0)).abs() < 1e-300);
        assert!((logit(expit(1.7)) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn variance_two_points() {
        assert_eq!(sample_variance(&[1.0, 2.0]), 0.5);
        assert!(sample_variance(&[3.0]).is_nan());
    }

    #[test]
    fn type7_quantiles() {
        let xs: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        assert!((quantile(&xs, 0.2) - 0.28).abs() < 1e-12);
        assert_eq!(quantile(&xs, 0.0), 0.1);
        assert_eq!(quantile(&xs, 1.0), 1.0);
        assert_eq!(quantile(&[5.0], 0.05), 5.0);
        // numpy.quantile([3, 1, 2, 4], 0.05) == 1.15
        assert!((quantile(&[3.0, 1.0, 2.0, 4.0], 0.05) - 1.15).abs() < 1e-12);
    }
}
