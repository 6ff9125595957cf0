//! Statistics of the data, used by the sufficiency-specialized Jacobian and
//! the conditional-representation check.

use crate::linalg::Mat;
use crate::stats;

/// A map from a data vector to a fixed-dimension summary.
pub trait Statistic: Sync {
    fn out_dim(&self) -> usize;

    fn eval(&self, data: &[f64]) -> Vec<f64>;

    /// Analytic derivative with respect to the data (`out_dim x n`), when
    /// available; callers fall back to finite differences otherwise.
    fn data_jacobian(&self, _data: &[f64]) -> Option<Mat> {
        None
    }
}

/// The sample mean.
pub struct SampleMean;

impl Statistic for SampleMean {
    fn out_dim(&self) -> usize {
        1
    }

    fn eval(&self, data: &[f64]) -> Vec<f64> {
        vec![stats::mean(data)]
    }

    fn data_jacobian(&self, data: &[f64]) -> Option<Mat> {
        Some(Mat::from_rows(vec![vec![1.0 / data.len() as f64; data.len()]]))
    }
}

/// `(sample mean, sample standard deviation)`, the sufficient pair for the
/// Gaussian location-scale model.
pub struct MeanAndSd;

impl Statistic for MeanAndSd {
    fn out_dim(&self) -> usize {
        2
    }

    fn eval(&self, data: &[f64]) -> Vec<f64> {
        vec![stats::mean(data), stats::sample_sd(data)]
    }

    fn data_jacobian(&self, data: &[f64]) -> Option<Mat> {
        let n = data.len() as f64;
        let m = stats::mean(data);
        let s = stats::sample_sd(data);
        if s == 0.0 {
            return None;
        }
        let mean_row = vec![1.0 / n; data.len()];
        let sd_row = data.iter().map(|&x| (x - m) / ((n - 1.0) * s)).collect();
        Some(Mat::from_rows(vec![mean_row, sd_row]))
    }
}

/// The standardized configuration `(x_i - mean) / sd`, ancillary for
/// location-scale families.
pub struct Configuration;

impl Statistic for Configuration {
    fn out_dim(&self) -> usize {
        0 // varies with the data length; out_dim is unused for ancillaries
    }

    fn eval(&self, data: &[f64]) -> Vec<f64> {
        let m = stats::mean(data);
        let s = stats::sample_sd(data);
        data.iter().map(|&x| (x - m) / s).collect()
    }
}

/// Closure adapter.
pub struct FnStatistic<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> FnStatistic<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> Statistic for FnStatistic<F> {
    fn out_dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, data: &[f64]) -> Vec<f64> {
        (self.f)(data)
    }
}
