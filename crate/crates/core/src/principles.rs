//! Numerical checkers for inference principles.
//!
//! - [`wcp_demo`]: conditionality on the two-instrument model — exact
//!   zero-residual conditioning reproduces the distribution of the
//!   instrument actually used, while the label-free variant gives the even
//!   mixture.
//! - [`check_separability`]: whether the Jacobian weight factors as
//!   `J(x, xi) = f(x) g(xi)`, in which case the fiducial density is a Bayes
//!   posterior with prior `g`; tested through second differences of `log J`
//!   on a product lattice of data sets and parameter nodes.
//! - [`check_slp_pair_sequential`]: the fixed-n versus sequential-stopping
//!   construction. With `O1` the final-mean crossing and `O2` the crossing
//!   with no earlier one, `P(O2) = P(O2 | O1) P(O1)`, so the two outcomes
//!   form a likelihood-proportional pair if and only if `P_theta(O2 | O1)`
//!   is constant in theta. The checker estimates that conditional
//!   probability on a theta ladder and tests constancy against an isotonic
//!   alternative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::jacobian::jacobian_full;
use crate::model::{make_two_instrument, make_two_instrument_marginal, Dge};
use crate::rng::substream;
use crate::sampler::{sample_gfd_exact, SamplerOptions};
use crate::stats::{isotonic_decreasing, ks_distance, normal_cdf, normal_pdf};

use rand_distr::{Distribution, StandardNormal};

/// The classical two-sided 5% normal critical value used by the sequential
/// boundary.
pub const SEQUENTIAL_Z: f64 = 1.96;

/// Verdict of the proportional-pair check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    SlpPair,
    NotSlpPair,
    Inconclusive,
}

/// Per-theta estimates and the constancy analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlpPairReport {
    pub sigma: f64,
    pub k_max: usize,
    pub reps: u64,
    pub theta: Vec<f64>,
    /// `P(O1)` and `P(O2)` estimates per theta.
    pub p_o1: Vec<f64>,
    pub p_o2: Vec<f64>,
    /// Conditional probability `c = P(O2 | O1)`; `None` marks a grid gap
    /// where `O1` never occurred.
    pub c: Vec<Option<f64>>,
    /// Adjusted (add-half) binomial standard errors, positive whenever the
    /// conditioning event occurred.
    pub c_stderr: Vec<f64>,
    /// Number of `O1` occurrences per theta (the conditioning sample size).
    pub n_o1: Vec<u64>,
    /// Weighted nonincreasing fit of `c` over theta.
    pub isotonic_fit: Vec<f64>,
    /// Whether every residual from the isotonic fit is within 4 SEs.
    pub isotonic_accepted: bool,
    /// Weighted mean of `c`, the best constant fit.
    pub constant_fit: f64,
    /// Whether some deviation from the constant fit exceeds 4 pooled SEs.
    pub constant_rejected: bool,
    pub spread: f64,
    pub pooled_se: f64,
    pub verdict: Verdict,
}

fn simulate_events(
    sigma: f64,
    k_max: usize,
    theta: f64,
    reps: u64,
    rng_seed: (u64, u64),
    o2_ignores_history: bool,
) -> (u64, u64) {
    let mut rng = substream(rng_seed.0, rng_seed.1);
    let thresholds: Vec<f64> =
        (1..=k_max).map(|k| SEQUENTIAL_Z * sigma / (k as f64).sqrt()).collect();
    let mut n_o1 = 0u64;
    let mut n_o2 = 0u64;
    for _ in 0..reps {
        let mut sum = 0.0f64;
        let mut crossed_early = false;
        for k in 1..=k_max {
            let z: f64 = StandardNormal.sample(&mut rng);
            sum += theta + sigma * z;
            let mean = sum / k as f64;
            if k < k_max && mean > thresholds[k - 1] {
                crossed_early = true;
            }
        }
        let final_crossing = sum / k_max as f64 > thresholds[k_max - 1];
        if final_crossing {
            n_o1 += 1;
            let in_o2 = if o2_ignores_history {
                // Positive-control surrogate: a parameter-free thinning of
                // O1, giving literally proportional likelihoods.
                let coin: f64 = rng.random();
                coin < 0.4
            } else {
                !crossed_early
            };
            if in_o2 {
                n_o2 += 1;
            }
        } else if o2_ignores_history {
            // Burn the thinning coin anyway to keep streams aligned.
            let _: f64 = rng.random();
        }
    }
    (n_o1, n_o2)
}

use rand::Rng;

fn assemble_report(
    sigma: f64,
    k_max: usize,
    reps: u64,
    theta_grid: &[f64],
    counts: Vec<(u64, u64)>,
) -> SlpPairReport {
    let mut p_o1 = Vec::new();
    let mut p_o2 = Vec::new();
    let mut c = Vec::new();
    let mut se = Vec::new();
    let mut n_o1_v = Vec::new();
    for &(n1, n2) in &counts {
        p_o1.push(n1 as f64 / reps as f64);
        p_o2.push(n2 as f64 / reps as f64);
        n_o1_v.push(n1);
        if n1 == 0 {
            c.push(None);
            se.push(f64::NAN);
        } else {
            c.push(Some(n2 as f64 / n1 as f64));
            // Add-half adjustment keeps the SE positive at the extremes.
            let adj = (n2 as f64 + 0.5) / (n1 as f64 + 1.0);
            se.push((adj * (1.0 - adj) / n1 as f64).sqrt());
        }
    }

    // Constancy analysis over the thetas where conditioning occurred.
    let valid: Vec<usize> = (0..c.len()).filter(|&i| c[i].is_some()).collect();
    let cvals: Vec<f64> = valid.iter().map(|&i| c[i].unwrap()).collect();
    let sevals: Vec<f64> = valid.iter().map(|&i| se[i]).collect();
    let weights: Vec<f64> = sevals.iter().map(|&s| 1.0 / (s * s)).collect();
    let iso = isotonic_decreasing(&cvals, &weights);
    let isotonic_accepted = cvals
        .iter()
        .zip(&iso)
        .zip(&sevals)
        .all(|((&y, &f), &s)| (y - f).abs() <= 4.0 * s);
    let wsum: f64 = weights.iter().sum();
    let constant_fit =
        cvals.iter().zip(&weights).map(|(&y, &w)| y * w).sum::<f64>() / wsum;
    let pooled_se =
        (sevals.iter().map(|&s| s * s).sum::<f64>() / sevals.len() as f64).sqrt();
    let constant_rejected =
        cvals.iter().any(|&y| (y - constant_fit).abs() > 4.0 * pooled_se);
    let spread = cvals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - cvals.iter().cloned().fold(f64::INFINITY, f64::min);
    let verdict = if spread > 4.0 * pooled_se {
        Verdict::NotSlpPair
    } else if spread <= 2.0 * pooled_se {
        Verdict::SlpPair
    } else {
        Verdict::Inconclusive
    };

    // Scatter the fit back onto the full grid (gaps keep NaN).
    let mut isotonic_fit = vec![f64::NAN; c.len()];
    for (slot, &i) in valid.iter().enumerate() {
        isotonic_fit[i] = iso[slot];
    }

    SlpPairReport {
        sigma,
        k_max,
        reps,
        theta: theta_grid.to_vec(),
        p_o1,
        p_o2,
        c,
        c_stderr: se,
        n_o1: n_o1_v,
        isotonic_fit,
        isotonic_accepted,
        constant_fit,
        constant_rejected,
        spread,
        pooled_se,
        verdict,
    }
}

/// Estimates `c(theta) = P_theta(O2 | O1)` for the sequential-stopping
/// construction with `k_max` means and boundary `1.96 sigma / sqrt(k)`, and
/// renders the constancy verdict.
pub fn check_slp_pair_sequential(
    sigma: f64,
    k_max: usize,
    theta_grid: &[f64],
    reps: u64,
    seed: u64,
) -> Result<SlpPairReport> {
    if sigma <= 0.0 {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    if theta_grid.is_empty() {
        return Err(Error::InvalidArgument("theta grid must be nonempty".into()));
    }
    if k_max < 2 || reps == 0 {
        return Err(Error::InvalidArgument("need k_max >= 2 and reps >= 1".into()));
    }
    let counts: Vec<(u64, u64)> = theta_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| simulate_events(sigma, k_max, t, reps, (seed, i as u64 + 1), false))
        .collect();
    Ok(assemble_report(sigma, k_max, reps, theta_grid, counts))
}

/// Positive control for the verdict logic: `O2` replaced by a
/// parameter-free thinning of `O1`, so the two outcomes have literally
/// proportional likelihoods and the verdict must come back `SlpPair`.
pub fn check_slp_pair_positive_control(
    sigma: f64,
    k_max: usize,
    theta_grid: &[f64],
    reps: u64,
    seed: u64,
) -> Result<SlpPairReport> {
    if sigma <= 0.0 || theta_grid.is_empty() || k_max < 2 || reps == 0 {
        return Err(Error::InvalidArgument("invalid control configuration".into()));
    }
    let counts: Vec<(u64, u64)> = theta_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| simulate_events(sigma, k_max, t, reps, (seed, i as u64 + 1), true))
        .collect();
    Ok(assemble_report(sigma, k_max, reps, theta_grid, counts))
}

/// Separability analysis of a Jacobian weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparabilityReport {
    pub separable: bool,
    /// Largest second difference of `log J` across (data, parameter) pairs.
    pub max_second_difference: f64,
    pub tolerance: f64,
    /// Parameter nodes the weight was evaluated at.
    pub xi_nodes: Vec<Vec<f64>>,
    /// When separable: `g(xi)` up to scale at `xi_nodes` (the implied
    /// prior).
    pub implied_prior: Option<Vec<f64>>,
}

/// Tolerance on second differences of `log J`; well above derivative noise
/// for analytic models and well below genuine non-separability signals.
pub const SEPARABILITY_TOL: f64 = 1e-8;

/// Tests `log J(x, xi) = a(x) + b(xi)` on the product of `datasets` and
/// `xi_nodes` by second differences against the first row and column.
pub fn check_separability_fn(
    jac: &dyn Fn(&[f64], &[f64]) -> Result<f64>,
    datasets: &[Vec<f64>],
    xi_nodes: &[Vec<f64>],
) -> Result<SeparabilityReport> {
    if datasets.len() < 2 {
        return Err(Error::InvalidArgument(
            "separability in the data requires at least two data sets".into(),
        ));
    }
    if xi_nodes.len() < 2 {
        return Err(Error::InvalidArgument("need at least two parameter nodes".into()));
    }
    let n_x = datasets.len();
    let n_xi = xi_nodes.len();
    let mut raw = vec![0.0f64; n_x * n_xi];
    let mut zero = 0usize;
    for (i, x) in datasets.iter().enumerate() {
        for (j, xi) in xi_nodes.iter().enumerate() {
            let v = jac(x, xi)?;
            if v <= 0.0 {
                zero += 1;
            }
            raw[i * n_xi + j] = v;
        }
    }
    // Factorization is only meaningful where the weight is positive: keep
    // the parameter nodes positive for every data set, and give up when the
    // lattice loses too much of itself.
    let kept: Vec<usize> =
        (0..n_xi).filter(|&j| (0..n_x).all(|i| raw[i * n_xi + j] > 0.0)).collect();
    if kept.len() < 2 || kept.len() * 2 < n_xi {
        return Err(Error::ZeroJacobian { zero, total: n_x * n_xi });
    }
    let log_j = |i: usize, j_slot: usize| raw[i * n_xi + kept[j_slot]].ln();

    let mut max_dd = 0.0f64;
    for i in 1..n_x {
        for j in 1..kept.len() {
            let dd = log_j(i, j) - log_j(i, 0) - log_j(0, j) + log_j(0, 0);
            max_dd = max_dd.max(dd.abs());
        }
    }
    let separable = max_dd <= SEPARABILITY_TOL;
    let kept_nodes: Vec<Vec<f64>> = kept.iter().map(|&j| xi_nodes[j].clone()).collect();
    let implied_prior = separable.then(|| {
        (0..kept.len()).map(|j| (log_j(0, j) - log_j(0, 0)).exp()).collect::<Vec<f64>>()
    });
    Ok(SeparabilityReport {
        separable,
        max_second_difference: max_dd,
        tolerance: SEPARABILITY_TOL,
        xi_nodes: kept_nodes,
        implied_prior,
    })
}

/// Separability of a model's full Jacobian weight, evaluated on a coarse
/// subsample of the grid (at most 12 nodes per axis).
pub fn check_separability(
    dge: &dyn Dge,
    datasets: &[Vec<f64>],
    grid: &ParameterGrid,
) -> Result<SeparabilityReport> {
    let nodes = subsample_nodes(grid, 12);
    check_separability_fn(
        &|x, xi| jacobian_full(dge, x, xi).map(|r| r.value),
        datasets,
        &nodes,
    )
}

fn subsample_nodes(grid: &ParameterGrid, per_axis: usize) -> Vec<Vec<f64>> {
    let picks: Vec<Vec<usize>> = grid
        .axes()
        .iter()
        .map(|a| {
            let k = a.count.min(per_axis);
            (0..k).map(|i| i * a.count / k + a.count / (2 * k).max(1)).map(|i| i.min(a.count - 1)).collect()
        })
        .collect();
    let mut nodes = Vec::new();
    let mut idx = vec![0usize; grid.dim()];
    loop {
        let cell: Vec<usize> =
            idx.iter().zip(&picks).map(|(&i, choices)| choices[i]).collect();
        nodes.push(grid.node(grid.flatten(&cell)));
        let mut a = grid.dim();
        loop {
            if a == 0 {
                return nodes;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < picks[a].len() {
                break;
            }
            idx[a] = 0;
        }
    }
}

/// One row of the plotting table produced by [`wcp_demo`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WcpTableRow {
    pub theta: f64,
    /// Density of the label-matched conditional law `N(x, sigma_m^2)`.
    pub conditional_pdf: f64,
    /// Density of the even mixture over both instruments.
    pub mixture_pdf: f64,
    /// Histogram density of the conditional sampler draws.
    pub conditional_hist: f64,
    /// Histogram density of the label-free sampler draws.
    pub marginal_hist: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WcpReport {
    pub x: f64,
    pub machine: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    pub n_draws: usize,
    /// KS of conditional draws against `N(x, sigma_m^2)`.
    pub ks_conditional: f64,
    /// KS of label-free draws against the even mixture centered at x.
    pub ks_marginal: f64,
    pub conditional_acceptance: f64,
    pub table: Vec<WcpTableRow>,
}

/// Runs exact zero-residual conditioning for the observed `(x, m)` pair and
/// for the label-free variant, and reports both fits.
pub fn wcp_demo(
    sigma1: f64,
    sigma2: f64,
    x: f64,
    machine: usize,
    n_draws: usize,
    seed: u64,
    opts: &SamplerOptions,
) -> Result<WcpReport> {
    if machine != 1 && machine != 2 {
        return Err(Error::InvalidArgument(format!("machine must be 1 or 2, got {machine}")));
    }
    let observed = make_two_instrument(sigma1, sigma2)?;
    let marginal = make_two_instrument_marginal(sigma1, sigma2)?;
    let sigma_m = observed.sigma(machine);

    let cond = sample_gfd_exact(&observed, &[x, machine as f64], n_draws, seed, opts)?;
    let marg = sample_gfd_exact(&marginal, &[x], n_draws, seed.wrapping_add(1), opts)?;

    let cond_draws = cond.coordinate(0);
    let marg_draws = marg.coordinate(0);
    let ks_conditional = ks_distance(&cond_draws, |t| normal_cdf((t - x) / sigma_m));
    let ks_marginal = ks_distance(&marg_draws, |t| {
        0.5 * normal_cdf((t - x) / sigma1) + 0.5 * normal_cdf((t - x) / sigma2)
    });

    // Plotting table over x +- 4 sigma2.
    let bins = 201usize;
    let lo = x - 4.0 * sigma2;
    let hi = x + 4.0 * sigma2;
    let width = (hi - lo) / bins as f64;
    let mut cond_hist = vec![0.0f64; bins];
    let mut marg_hist = vec![0.0f64; bins];
    for &v in &cond_draws {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        cond_hist[b] += 1.0;
    }
    for &v in &marg_draws {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        marg_hist[b] += 1.0;
    }
    let table = (0..bins)
        .map(|b| {
            let theta = lo + (b as f64 + 0.5) * width;
            WcpTableRow {
                theta,
                conditional_pdf: normal_pdf((theta - x) / sigma_m) / sigma_m,
                mixture_pdf: 0.5 * normal_pdf((theta - x) / sigma1) / sigma1
                    + 0.5 * normal_pdf((theta - x) / sigma2) / sigma2,
                conditional_hist: cond_hist[b] / (n_draws as f64 * width),
                marginal_hist: marg_hist[b] / (n_draws as f64 * width),
            }
        })
        .collect();

    Ok(WcpReport {
        x,
        machine,
        sigma1,
        sigma2,
        n_draws,
        ks_conditional,
        ks_marginal,
        conditional_acceptance: cond.meta.acceptance_rate,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ParamBox, ParameterGrid};
    use crate::model::{make_normal_location, make_normal_location_scale};

    #[test]
    fn sequential_pair_is_refuted_at_moderate_reps() {
        let theta = [0.0, 0.1, 0.2, 0.5, 1.0];
        let r = check_slp_pair_sequential(1.0, 169, &theta, 20_000, 5).unwrap();
        // The paper's qualitative claims: c(0) > 0 and c decays in theta.
        assert!(r.c[0].unwrap() > 0.0);
        assert!(r.c[0].unwrap() > r.c[4].unwrap_or(0.0));
        assert_eq!(r.verdict, Verdict::NotSlpPair);
        assert!(r.constant_rejected);
        assert!(r.isotonic_accepted, "isotonic residuals: {:?}", r.c);
        // O2 is a subevent of O1.
        for (p2, p1) in r.p_o2.iter().zip(&r.p_o1) {
            assert!(p2 <= p1);
        }
        // Decomposition identity: the estimators factor exactly.
        for i in 0..theta.len() {
            if let Some(c) = r.c[i] {
                assert!((r.p_o2[i] - c * r.p_o1[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn positive_control_is_declared_a_pair() {
        let theta = [0.0, 0.1, 0.2, 0.5, 1.0];
        let r = check_slp_pair_positive_control(1.0, 169, &theta, 20_000, 7).unwrap();
        assert_eq!(r.verdict, Verdict::SlpPair, "c = {:?}", r.c);
        assert!(!r.constant_rejected);
    }

    #[test]
    fn degenerate_conditioning_is_a_gap_not_a_crash() {
        // theta far below the boundary: O1 essentially never happens.
        let r = check_slp_pair_sequential(1.0, 169, &[-30.0, 0.0], 200, 11).unwrap();
        assert!(r.c[0].is_none());
        assert!(r.c[1].is_some());
    }

    #[test]
    fn location_scale_jacobian_separates_with_reciprocal_scale_prior() {
        let m = make_normal_location_scale(3).unwrap();
        let datasets = vec![vec![0.0, 1.0, 3.0], vec![-1.0, 0.5, 2.0], vec![0.3, 0.4, 1.1]];
        let grid = ParameterGrid::from_box(
            &ParamBox::new(vec![-2.0, 0.2], vec![2.0, 3.0]).unwrap(),
            &[40, 40],
        )
        .unwrap();
        let r = check_separability(&m, &datasets, &grid).unwrap();
        assert!(r.separable, "max second difference {}", r.max_second_difference);
        let prior = r.implied_prior.unwrap();
        // g(xi) proportional to 1/sigma: g * sigma is constant across nodes.
        let reference = prior[0] * r.xi_nodes[0][1];
        for (g, node) in prior.iter().zip(&r.xi_nodes) {
            let val = g * node[1];
            assert!(
                (val - reference).abs() <= 1e-6 * reference.abs(),
                "g*sigma varied: {val} vs {reference}"
            );
        }
    }

    #[test]
    fn location_jacobian_is_trivially_separable_with_flat_prior() {
        let m = make_normal_location(3).unwrap();
        let datasets = vec![vec![0.0, 1.0, 3.0], vec![-1.0, 0.5, 2.0]];
        let grid = ParameterGrid::line(-2.0, 2.0, 30).unwrap();
        let r = check_separability(&m, &datasets, &grid).unwrap();
        assert!(r.separable);
        for g in r.implied_prior.unwrap() {
            assert!((g - 1.0).abs() < 1e-10, "flat prior expected, got {g}");
        }
    }

    #[test]
    fn constructed_weight_is_not_separable() {
        let datasets = vec![vec![0.5], vec![1.0], vec![2.0]];
        let nodes = vec![vec![0.5], vec![1.0], vec![1.5]];
        let r = check_separability_fn(
            &|x, xi| Ok(1.0 + x[0] * x[0] * xi[0] * xi[0]),
            &datasets,
            &nodes,
        )
        .unwrap();
        assert!(!r.separable);
        assert!(r.max_second_difference > 1e-2);
        assert!(r.implied_prior.is_none());
    }

    #[test]
    fn zero_jacobian_region_is_an_error() {
        let datasets = vec![vec![0.0], vec![1.0]];
        let nodes = vec![vec![0.0], vec![1.0]];
        let err = check_separability_fn(&|x, _xi| Ok(x[0]), &datasets, &nodes).unwrap_err();
        assert!(matches!(err, Error::ZeroJacobian { .. }));
    }

    #[test]
    fn wcp_demo_matches_both_conditional_and_mixture_laws() {
        let opts = SamplerOptions::default();
        for machine in [1usize, 2] {
            let r = wcp_demo(1.0, 10.0, 0.0, machine, 10_000, 13, &opts).unwrap();
            assert!(r.ks_conditional < 0.03, "m={machine}: KS {}", r.ks_conditional);
            assert!(r.ks_marginal < 0.03, "m={machine}: KS {}", r.ks_marginal);
            // Conditioning on the label keeps about half the proposals.
            assert!((r.conditional_acceptance - 0.5).abs() < 0.05);
            // Histogram integrates to 1.
            let width = r.table[1].theta - r.table[0].theta;
            let mass: f64 = r.table.iter().map(|row| row.conditional_hist * width).sum();
            assert!((mass - 1.0).abs() < 1e-9);
        }
    }
}
