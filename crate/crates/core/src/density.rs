//! Tabulated fiducial densities on parameter grids.
//!
//! The continuous fiducial density is likelihood times Jacobian weight,
//! normalized by midpoint quadrature over the grid:
//!
//! ```text
//! r(xi) = f(x, xi) J(x, xi) / integral_Theta f(x, xi') J(x, xi') dxi'
//! ```
//!
//! Likelihoods are handled in log space and exponentiated after subtracting
//! the grid maximum, so long data vectors do not underflow. Grid nodes where
//! the inverse map fails contribute zero mass and are counted, not fatal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::jacobian::{jacobian_full, jacobian_sufficient, JacobianResult};
use crate::model::{Dge, Statistic};
use crate::stats::kahan_sum;

/// Relative tolerance of the grid-refinement stability check.
pub const STABILITY_TOL: f64 = 1e-3;

/// What produced a tabulated density.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensitySource {
    /// Likelihood times the full subdeterminant-sum Jacobian.
    JacobianWeighted,
    /// Likelihood times the sufficiency-specialized Jacobian.
    SufficientJacobian,
    /// Negative parameter-derivative of a CDF (single-observation form).
    CdfDerivative,
}

/// A normalized density tabulated at the midpoints of a [`ParameterGrid`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiducialDensity {
    pub grid: ParameterGrid,
    /// Normalized density value per node, flattened in grid order.
    pub values: Vec<f64>,
    /// The quadrature value of the unnormalized integrand.
    pub normalizer: f64,
    /// Nodes where the inverse map failed or the parameter fell outside the
    /// model box; these carry zero mass.
    pub failed_nodes: usize,
    pub source: DensitySource,
}

struct Tabulation {
    values: Vec<f64>,
    normalizer: f64,
    log_normalizer: f64,
    failed_nodes: usize,
}

fn tabulate_raw(
    dge: &dyn Dge,
    x: &[f64],
    grid: &ParameterGrid,
    jac_at: &dyn Fn(&[f64]) -> Result<JacobianResult>,
) -> Result<Tabulation> {
    if grid.dim() != dge.param_dim() {
        return Err(Error::Dimension(format!(
            "grid has dimension {}, model has p = {}",
            grid.dim(),
            dge.param_dim()
        )));
    }
    let n_nodes = grid.len();
    let mut log_lik = vec![f64::NEG_INFINITY; n_nodes];
    let mut jac = vec![0.0f64; n_nodes];
    let mut failed = 0usize;
    let mut max_ll = f64::NEG_INFINITY;
    let space = dge.param_space();
    for (idx, node) in grid.nodes().enumerate() {
        if !space.contains(&node) {
            failed += 1;
            continue;
        }
        let j = match jac_at(&node) {
            Ok(r) => r.value,
            Err(Error::InverseFailed(_)) => {
                failed += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let ll = dge.log_likelihood(x, &node).ok_or(Error::LikelihoodUnavailable)?;
        log_lik[idx] = ll;
        jac[idx] = j;
        if j > 0.0 && ll > max_ll {
            max_ll = ll;
        }
    }
    if !max_ll.is_finite() {
        return Err(Error::NonIntegrable(
            "likelihood times jacobian vanishes at every grid node".into(),
        ));
    }
    let weights: Vec<f64> = log_lik
        .iter()
        .zip(&jac)
        .map(|(&ll, &j)| if j > 0.0 { (ll - max_ll).exp() * j } else { 0.0 })
        .collect();
    let scaled = kahan_sum(weights.iter().copied()) * grid.cell_volume();
    if !(scaled.is_finite() && scaled > 0.0) {
        return Err(Error::NonIntegrable(format!("quadrature of the integrand is {scaled}")));
    }
    let values = weights.iter().map(|&w| w / scaled).collect();
    let log_normalizer = max_ll + scaled.ln();
    let normalizer = log_normalizer.exp();
    if !(normalizer.is_finite() && normalizer > 0.0) {
        return Err(Error::NonIntegrable(format!(
            "normalizing integral is {normalizer} (log {log_normalizer})"
        )));
    }
    Ok(Tabulation { values, normalizer, log_normalizer, failed_nodes: failed })
}

fn tabulate_checked(
    dge: &dyn Dge,
    x: &[f64],
    grid: &ParameterGrid,
    jac_at: &dyn Fn(&[f64]) -> Result<JacobianResult>,
    source: DensitySource,
    stability_check: bool,
) -> Result<FiducialDensity> {
    let coarse = tabulate_raw(dge, x, grid, jac_at)?;
    if stability_check {
        let fine = tabulate_raw(dge, x, &grid.refined_double(), jac_at)?;
        let rel = (fine.log_normalizer - coarse.log_normalizer).exp_m1().abs();
        if rel > STABILITY_TOL {
            return Err(Error::NonIntegrable(format!(
                "normalizer moved by a relative {rel:.3e} when the grid was doubled"
            )));
        }
    }
    Ok(FiducialDensity {
        grid: grid.clone(),
        values: coarse.values,
        normalizer: coarse.normalizer,
        failed_nodes: coarse.failed_nodes,
        source,
    })
}

/// Tabulates the Jacobian-weighted fiducial density of `dge` given data `x`.
///
/// Fails with [`Error::NonIntegrable`] when the normalizing quadrature is
/// zero, non-finite, or moves by more than [`STABILITY_TOL`] relative when
/// every grid axis is doubled.
pub fn tabulate_gfd(dge: &dyn Dge, x: &[f64], grid: &ParameterGrid) -> Result<FiducialDensity> {
    tabulate_checked(
        dge,
        x,
        grid,
        &|node| jacobian_full(dge, x, node),
        DensitySource::JacobianWeighted,
        true,
    )
}

/// Same, with the sufficiency-specialized single-determinant Jacobian.
pub fn tabulate_gfd_sufficient(
    dge: &dyn Dge,
    stat: &dyn Statistic,
    x: &[f64],
    grid: &ParameterGrid,
) -> Result<FiducialDensity> {
    tabulate_checked(
        dge,
        x,
        grid,
        &|node| jacobian_sufficient(dge, stat, x, node),
        DensitySource::SufficientJacobian,
        true,
    )
}

/// Classical single-observation fiducial density: `r(theta) = -dF(x, theta)/dtheta`
/// for a CDF that is decreasing in the parameter at the observed `x`,
/// renormalized on the grid.
///
/// The derivative uses central differences with step `1e-6 (1 + |theta|)`.
pub fn fisher_fiducial<F>(cdf: F, x: f64, grid: &ParameterGrid) -> Result<FiducialDensity>
where
    F: Fn(f64, f64) -> f64,
{
    if grid.dim() != 1 {
        return Err(Error::Dimension("the single-observation form needs a 1-d grid".into()));
    }
    let nodes = grid.axis(0).nodes();
    // Decreasing-in-theta precondition, checked on adjacent node pairs.
    for w in nodes.windows(2) {
        let (f0, f1) = (cdf(x, w[0]), cdf(x, w[1]));
        if !(0.0..=1.0).contains(&f0) || !(0.0..=1.0).contains(&f1) {
            return Err(Error::InvalidCdf(format!(
                "F(x, theta) left [0, 1] near theta = {}",
                w[0]
            )));
        }
        if f1 > f0 + 1e-12 {
            return Err(Error::NotMonotone(format!(
                "F(x, theta) increases between theta = {} and {}",
                w[0], w[1]
            )));
        }
    }
    let mut values: Vec<f64> = nodes
        .iter()
        .map(|&t| {
            let h = crate::linalg::fd_step(t);
            let d = -(cdf(x, t + h) - cdf(x, t - h)) / (2.0 * h);
            d.max(0.0)
        })
        .collect();
    let norm = kahan_sum(values.iter().copied()) * grid.cell_volume();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::NonIntegrable(format!("CDF derivative integrates to {norm}")));
    }
    for v in &mut values {
        *v /= norm;
    }
    Ok(FiducialDensity {
        grid: grid.clone(),
        values,
        normalizer: norm,
        failed_nodes: 0,
        source: DensitySource::CdfDerivative,
    })
}

impl FiducialDensity {
    /// Quadrature of the tabulated values; 1 up to roundoff by construction.
    pub fn quadrature_mass(&self) -> f64 {
        kahan_sum(self.values.iter().copied()) * self.grid.cell_volume()
    }

    /// CDF at `t` for 1-d densities, piecewise linear between cell edges.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        let (edges, cum) = self.cdf_edges()?;
        if t <= edges[0] {
            return Ok(0.0);
        }
        if t >= *edges.last().unwrap() {
            return Ok(1.0);
        }
        let k = edges.partition_point(|&e| e <= t) - 1;
        let frac = (t - edges[k]) / (edges[k + 1] - edges[k]);
        Ok(cum[k] + frac * (cum[k + 1] - cum[k]))
    }

    /// Grid-interpolated quantile of the tabulated CDF, 1-d densities only.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0 < q && q < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "quantile level must be in (0,1), got {q}"
            )));
        }
        let (edges, cum) = self.cdf_edges()?;
        let k = match cum.iter().position(|&c| c >= q) {
            Some(0) => return Ok(edges[0]),
            Some(k) => k,
            None => return Err(Error::QuantileOutOfRange { level: q }),
        };
        let (c0, c1) = (cum[k - 1], cum[k]);
        let frac = if c1 > c0 { (q - c0) / (c1 - c0) } else { 0.5 };
        Ok(edges[k - 1] + frac * (edges[k] - edges[k - 1]))
    }

    /// Cell-edge positions and cumulative mass, normalized to end at 1.
    fn cdf_edges(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.grid.dim() != 1 {
            return Err(Error::Dimension(
                "CDF and quantile queries need a 1-d density; marginalize first".into(),
            ));
        }
        let ax = *self.grid.axis(0);
        let h = ax.step();
        let mut edges = Vec::with_capacity(ax.count + 1);
        let mut cum = Vec::with_capacity(ax.count + 1);
        edges.push(ax.lo);
        cum.push(0.0);
        let mut acc = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            acc += v * h;
            edges.push(ax.lo + (i as f64 + 1.0) * h);
            cum.push(acc);
        }
        let total = acc;
        if total <= 0.0 {
            return Err(Error::NonIntegrable("tabulated density has zero mass".into()));
        }
        for c in &mut cum {
            *c /= total;
        }
        Ok((edges, cum))
    }

    /// Marginal density along `axis`, summing out the others.
    pub fn marginal(&self, axis: usize) -> Result<FiducialDensity> {
        if axis >= self.grid.dim() {
            return Err(Error::Dimension(format!(
                "axis {axis} out of range for a {}-d grid",
                self.grid.dim()
            )));
        }
        let ax = *self.grid.axis(axis);
        let mut m = vec![0.0f64; ax.count];
        for (flat, &v) in self.values.iter().enumerate() {
            let idx = self.grid.unflatten(flat);
            m[idx[axis]] += v;
        }
        // Multiply by the cell measure of the summed-out axes.
        let other_measure = self.grid.cell_volume() / ax.step();
        for v in &mut m {
            *v *= other_measure;
        }
        Ok(FiducialDensity {
            grid: ParameterGrid::new(vec![ax])?,
            values: m,
            normalizer: self.normalizer,
            failed_nodes: self.failed_nodes,
            source: self.source.clone(),
        })
    }
}

/// Free-function form of [`FiducialDensity::quantile`].
pub fn density_cdf_quantile(fd: &FiducialDensity, q: f64) -> Result<f64> {
    fd.quantile(q)
}
