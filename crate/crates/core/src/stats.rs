//! Small statistical utilities shared across the crate: summation,
//! empirical CDFs, Kolmogorov–Smirnov distances, normal CDF wrappers,
//! and weighted isotonic regression.

use statrs::distribution::ContinuousCDF;

/// Compensated summation (Kahan–Babuška/Neumaier) in fixed input order.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn mean(xs: &[f64]) -> f64 {
    kahan_sum(xs.iter().copied()) / xs.len() as f64
}

/// Sample standard deviation with the n−1 divisor.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss = kahan_sum(xs.iter().map(|&x| (x - m) * (x - m)));
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    use std::sync::OnceLock;
    static STD: OnceLock<statrs::distribution::Normal> = OnceLock::new();
    STD.get_or_init(|| statrs::distribution::Normal::new(0.0, 1.0).unwrap())
        .cdf(x)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// One-sample Kolmogorov–Smirnov statistic against a CDF.
///
/// `sup_x |F_n(x) - F(x)|`, evaluated at both sides of every jump.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    assert!(!samples.is_empty(), "ks_distance needs at least one sample");
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i as f64 + 1.0) / n - f).abs());
    }
    d
}

/// Empirical CDF value `P(X <= t)` of a sorted sample.
pub fn ecdf_sorted(sorted: &[f64], t: f64) -> f64 {
    let idx = sorted.partition_point(|&x| x <= t);
    idx as f64 / sorted.len() as f64
}

/// Weighted isotonic regression, nonincreasing fit, by pool-adjacent-violators.
///
/// Returns the fitted values; weights must be positive.
pub fn isotonic_decreasing(y: &[f64], w: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), w.len());
    // PAVA on the negated sequence gives a nondecreasing fit; negate back.
    let neg: Vec<f64> = y.iter().map(|v| -v).collect();
    isotonic_increasing(&neg, w).into_iter().map(|v| -v).collect()
}

/// Weighted isotonic regression, nondecreasing fit.
pub fn isotonic_increasing(y: &[f64], w: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), w.len());
    // Blocks of (weighted mean, total weight, member count).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&yi, &wi) in y.iter().zip(w) {
        blocks.push((yi, wi, 1));
        while blocks.len() >= 2 {
            let (m2, w2, c2) = blocks[blocks.len() - 1];
            let (m1, w1, c1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            blocks.pop();
            let wt = w1 + w2;
            blocks.push(((m1 * w1 + m2 * w2) / wt, wt, c1 + c2));
        }
    }
    let mut fit = Vec::with_capacity(y.len());
    for (m, _, c) in blocks {
        fit.extend(std::iter::repeat(m).take(c));
    }
    fit
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kahan_handles_magnitude_spread() {
        let xs = vec![1e16, 1.0, -1e16, 1.0];
        assert_eq!(kahan_sum(xs), 2.0);
    }

    #[test]
    fn normal_cdf_classical_points() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, max_relative = 1e-12);
        assert_relative_eq!(normal_cdf(1.959963984540054), 0.975, max_relative = 1e-9);
        assert_relative_eq!(normal_cdf(-1.959963984540054), 0.025, max_relative = 1e-9);
    }

    #[test]
    fn ks_of_exact_grid_sample_is_small() {
        // Deterministic uniform grid sample: KS = 1/(2n) exactly.
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0));
        assert_relative_eq!(d, 0.5 / n as f64, max_relative = 1e-9);
    }

    #[test]
    fn ks_detects_shift() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0 + 0.2).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0));
        assert!(d > 0.19 && d < 0.21, "d = {d}");
    }

    #[test]
    fn pava_pools_violators() {
        let y = vec![3.0, 1.0, 2.0, 0.5];
        let w = vec![1.0, 1.0, 1.0, 1.0];
        let fit = isotonic_decreasing(&y, &w);
        // Nonincreasing and weighted-mean preserving.
        for k in 1..fit.len() {
            assert!(fit[k] <= fit[k - 1] + 1e-12);
        }
        assert_relative_eq!(fit.iter().sum::<f64>(), y.iter().sum::<f64>(), max_relative = 1e-12);
        // Already-monotone input is untouched.
        let y2 = vec![4.0, 3.0, 2.0, 1.0];
        assert_eq!(isotonic_decreasing(&y2, &w), y2);
    }
}
