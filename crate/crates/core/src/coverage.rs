//! Frequentist repetition engine: simulate data at a true parameter, build
//! fiducial intervals, and count how often they cover.
//!
//! Continuous one-parameter models take equal-tailed intervals from the
//! tabulated density's quantiles; lattice models take the half-corrected
//! interval plus the conservative envelope interval. Within a run the same
//! simulated data is reused across confidence levels, so empirical coverage
//! is monotone in the level by construction.

use serde::{Deserialize, Serialize};

use crate::density::tabulate_gfd;
use crate::discrete::{discrete_bounds, half_corrected_interval};
use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::model::{Dge, DiscreteDge};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub model_id: String,
    pub xi_true: Vec<f64>,
    pub level: f64,
    /// Replications that produced an interval; failures are excluded.
    pub reps: usize,
    pub coverage: f64,
    /// Binomial standard error `sqrt(cov (1 - cov) / reps)`.
    pub stderr: f64,
    pub mean_width: f64,
    pub failures: usize,
}

fn finish(
    model_id: &str,
    xi_true: &[f64],
    level: f64,
    covered: usize,
    widths_sum: f64,
    successes: usize,
    failures: usize,
) -> CoverageReport {
    let coverage = covered as f64 / successes as f64;
    CoverageReport {
        model_id: model_id.to_string(),
        xi_true: xi_true.to_vec(),
        level,
        reps: successes,
        coverage,
        stderr: (coverage * (1.0 - coverage) / successes as f64).sqrt(),
        mean_width: widths_sum / successes as f64,
        failures,
    }
}

/// Coverage of equal-tailed density-quantile intervals for a continuous
/// one-parameter model, one report per level (same simulated data across
/// levels).
///
/// Replications whose tabulation or quantile fails are counted separately;
/// the run aborts only when more than half fail.
pub fn run_coverage_continuous(
    dge: &dyn Dge,
    xi_true: &[f64],
    levels: &[f64],
    reps: usize,
    grid: &ParameterGrid,
    seed: u64,
) -> Result<Vec<CoverageReport>> {
    if dge.param_dim() != 1 {
        return Err(Error::Dimension(
            "continuous coverage uses density quantiles and needs p = 1".into(),
        ));
    }
    validate_inputs(dge, xi_true, levels, reps)?;

    let mut covered = vec![0usize; levels.len()];
    let mut width_sum = vec![0.0f64; levels.len()];
    let mut successes = 0usize;
    let mut failures = 0usize;
    for rep in 0..reps {
        let mut rng = substream(seed, rep as u64 + 1);
        let u = dge.sample_noise(&mut rng);
        let x = dge.forward(&u, xi_true);
        let result = (|| -> Result<Vec<(f64, f64)>> {
            let fd = tabulate_gfd(dge, &x, grid)?;
            levels
                .iter()
                .map(|&level| {
                    let alpha = 1.0 - level;
                    Ok((fd.quantile(alpha / 2.0)?, fd.quantile(1.0 - alpha / 2.0)?))
                })
                .collect()
        })();
        match result {
            Ok(intervals) => {
                successes += 1;
                for (slot, (lo, hi)) in intervals.into_iter().enumerate() {
                    if lo <= xi_true[0] && xi_true[0] <= hi {
                        covered[slot] += 1;
                    }
                    width_sum[slot] += hi - lo;
                }
            }
            Err(_) => failures += 1,
        }
        if failures * 2 > reps {
            return Err(Error::CoverageAborted { failed: failures, attempted: rep + 1 });
        }
    }
    if successes == 0 {
        return Err(Error::CoverageAborted { failed: failures, attempted: reps });
    }
    Ok(levels
        .iter()
        .enumerate()
        .map(|(slot, &level)| {
            finish(
                &dge.model_id(),
                xi_true,
                level,
                covered[slot],
                width_sum[slot],
                successes,
                failures,
            )
        })
        .collect())
}

/// Half-corrected and envelope interval coverage for a lattice model, one
/// `(half, envelope)` report pair per level on shared simulated data.
pub fn run_coverage_discrete(
    dge: &dyn DiscreteDge,
    xi_true: f64,
    levels: &[f64],
    reps: usize,
    grid: &ParameterGrid,
    seed: u64,
) -> Result<Vec<(CoverageReport, CoverageReport)>> {
    validate_inputs(dge as &dyn Dge, &[xi_true], levels, reps)?;

    let mut covered_half = vec![0usize; levels.len()];
    let mut covered_env = vec![0usize; levels.len()];
    let mut width_half = vec![0.0f64; levels.len()];
    let mut width_env = vec![0.0f64; levels.len()];
    let mut successes = 0usize;
    let mut failures = 0usize;
    for rep in 0..reps {
        let mut rng = substream(seed, rep as u64 + 1);
        let u = dge.sample_noise(&mut rng);
        let x = dge.forward(&u, &[xi_true])[0] as i64;
        let result = (|| -> Result<Vec<crate::discrete::DiscreteInterval>> {
            let bounds = discrete_bounds(dge, x, grid)?;
            levels.iter().map(|&level| half_corrected_interval(&bounds, level)).collect()
        })();
        match result {
            Ok(intervals) => {
                successes += 1;
                for (slot, iv) in intervals.into_iter().enumerate() {
                    if iv.half.0 <= xi_true && xi_true <= iv.half.1 {
                        covered_half[slot] += 1;
                    }
                    if iv.envelope.0 <= xi_true && xi_true <= iv.envelope.1 {
                        covered_env[slot] += 1;
                    }
                    width_half[slot] += iv.half.1 - iv.half.0;
                    width_env[slot] += iv.envelope.1 - iv.envelope.0;
                }
            }
            Err(_) => failures += 1,
        }
        if failures * 2 > reps {
            return Err(Error::CoverageAborted { failed: failures, attempted: rep + 1 });
        }
    }
    if successes == 0 {
        return Err(Error::CoverageAborted { failed: failures, attempted: reps });
    }
    let id = dge.model_id();
    Ok(levels
        .iter()
        .enumerate()
        .map(|(slot, &level)| {
            (
                finish(
                    &id,
                    &[xi_true],
                    level,
                    covered_half[slot],
                    width_half[slot],
                    successes,
                    failures,
                ),
                finish(
                    &id,
                    &[xi_true],
                    level,
                    covered_env[slot],
                    width_env[slot],
                    successes,
                    failures,
                ),
            )
        })
        .collect())
}

fn validate_inputs(dge: &dyn Dge, xi_true: &[f64], levels: &[f64], reps: usize) -> Result<()> {
    if !dge.param_space().contains(xi_true) {
        return Err(Error::OutsideParamSpace(xi_true.to_vec()));
    }
    if levels.is_empty() || levels.iter().any(|&l| !(0.0 < l && l < 1.0)) {
        return Err(Error::InvalidArgument(
            "levels must be nonempty and inside (0, 1)".into(),
        ));
    }
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be >= 1".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ParamBox;
    use crate::model::{make_geometric, make_normal_location};

    #[test]
    fn location_model_interval_is_calibrated() {
        // X = theta + U with one observation: the 95% fiducial interval is
        // x +- 1.96, an exact pivot.
        let m = make_normal_location(1).unwrap();
        let grid = ParameterGrid::line(-10.0, 10.0, 1200).unwrap();
        let reports =
            run_coverage_continuous(&m, &[0.0], &[0.5, 0.9, 0.95], 600, &grid, 101).unwrap();
        let r95 = &reports[2];
        assert_eq!(r95.failures, 0);
        assert_eq!(r95.reps, 600);
        assert!(
            (r95.coverage - 0.95).abs() <= 2.0 * r95.stderr,
            "coverage {} +- {}",
            r95.coverage,
            r95.stderr
        );
        // The exact-pivot width is 2 * 1.96 at every replication.
        assert!((r95.mean_width - 2.0 * 1.959963984540054).abs() < 0.02);
        // Monotone in the level on shared data.
        assert!(reports[2].coverage >= reports[1].coverage);
        assert!(reports[1].coverage >= reports[0].coverage);
        // Half-level sanity.
        assert!(
            (reports[0].coverage - 0.5).abs() <= 3.0 * reports[0].stderr,
            "coverage {}",
            reports[0].coverage
        );
    }

    #[test]
    fn runs_are_deterministic_for_a_fixed_seed() {
        let m = make_normal_location(1).unwrap();
        let grid = ParameterGrid::line(-10.0, 10.0, 600).unwrap();
        let a = run_coverage_continuous(&m, &[0.3], &[0.9], 150, &grid, 55).unwrap();
        let b = run_coverage_continuous(&m, &[0.3], &[0.9], 150, &grid, 55).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn geometric_envelope_interval_never_covers_less_than_half_corrected() {
        let g = make_geometric();
        let grid = ParameterGrid::line(1e-6, 1.0 - 1e-6, 4000).unwrap();
        let reports =
            run_coverage_discrete(&g, 0.3, &[0.5, 0.95], 400, &grid, 77).unwrap();
        for (half, envelope) in &reports {
            assert!(envelope.coverage >= half.coverage, "{envelope:?} vs {half:?}");
            assert!(envelope.mean_width >= half.mean_width);
        }
        let (half95, _) = &reports[1];
        assert!(
            half95.coverage > 0.88 && half95.coverage <= 1.0,
            "95% half-corrected coverage {}",
            half95.coverage
        );
    }

    #[test]
    fn failed_replications_are_excluded_and_counted() {
        // Location model whose likelihood is unavailable whenever the
        // observation falls below a cut, failing those replications.
        struct Flaky {
            inner: crate::model::NormalLocation,
            cut: f64,
        }
        impl Dge for Flaky {
            fn model_id(&self) -> String {
                "flaky-location".into()
            }
            fn data_dim(&self) -> usize {
                1
            }
            fn param_dim(&self) -> usize {
                1
            }
            fn noise_dim(&self) -> usize {
                1
            }
            fn param_space(&self) -> &ParamBox {
                self.inner.param_space()
            }
            fn forward(&self, u: &[f64], xi: &[f64]) -> Vec<f64> {
                self.inner.forward(u, xi)
            }
            fn sample_noise(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
                self.inner.sample_noise(rng)
            }
            fn has_inverse(&self) -> bool {
                true
            }
            fn inverse(&self, x: &[f64], xi: &[f64]) -> Option<Vec<f64>> {
                self.inner.inverse(x, xi)
            }
            fn log_likelihood(&self, x: &[f64], xi: &[f64]) -> Option<f64> {
                if x[0] < self.cut {
                    None
                } else {
                    self.inner.log_likelihood(x, xi)
                }
            }
        }
        let grid = ParameterGrid::line(-10.0, 10.0, 400).unwrap();
        // Cut below the median: roughly a third of replications fail.
        let partial = Flaky { inner: make_normal_location(1).unwrap(), cut: -0.4 };
        let reports = run_coverage_continuous(&partial, &[0.0], &[0.5], 300, &grid, 91).unwrap();
        let r = &reports[0];
        assert!(r.failures > 50, "expected many failures, got {}", r.failures);
        assert_eq!(r.reps + r.failures, 300);

        // A cut above the data range fails every replication and aborts.
        let total = Flaky { inner: make_normal_location(1).unwrap(), cut: 50.0 };
        let err = run_coverage_continuous(&total, &[0.0], &[0.5], 100, &grid, 91).unwrap_err();
        assert!(matches!(err, Error::CoverageAborted { .. }));
    }
}
