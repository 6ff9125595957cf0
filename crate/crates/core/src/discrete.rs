//! Distribution-function envelopes for discrete-model fiducial inference.
//!
//! Inverting a lattice CDF at an observed value is set-valued, so the
//! fiducial CDF is pinned only to an envelope. With `F(x-, xi)` the left
//! limit (the previous lattice point):
//!
//! - `F(x, .)` decreasing in xi:  `1 - F(x, xi) <= H(xi) <= 1 - F(x-, xi)`
//! - `F(x, .)` increasing in xi:  `F(x-, xi) <= H(xi) <= F(x, xi)`
//!
//! The half correction takes the midpoint of the envelope as the working
//! CDF. The geometric-versus-binomial comparison below exhibits two
//! experiments with proportional likelihoods whose envelopes share the
//! upper bound but differ in the lower bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::model::DiscreteModel;

/// Which way `F(x, xi)` moves as xi grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MonotoneDirection {
    Decreasing,
    Increasing,
}

/// Envelope `lower <= half <= upper` of valid fiducial CDF values on a
/// 1-d parameter grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteFiducialBounds {
    /// Parameter values (grid node midpoints).
    pub params: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Midpoint of the envelope: the half-corrected CDF.
    pub half: Vec<f64>,
    pub direction: MonotoneDirection,
}

/// Builds the envelope for the observed lattice value `x` of a model with
/// CDF `F(value, xi)` on the 1-d `grid`. `cdf_left` must give the CDF at
/// the previous lattice point (zero at the bottom of the support).
///
/// The monotonicity direction in xi is auto-detected; a non-monotone CDF is
/// an error, as is one leaving `[0, 1]` or decreasing in `x`.
pub fn discrete_bounds_fn(
    cdf: &dyn Fn(f64) -> f64,
    cdf_left: &dyn Fn(f64) -> f64,
    grid: &ParameterGrid,
) -> Result<DiscreteFiducialBounds> {
    if grid.dim() != 1 {
        return Err(Error::Dimension("discrete bounds need a 1-d parameter grid".into()));
    }
    let params = grid.axis(0).nodes();
    let at_x: Vec<f64> = params.iter().map(|&p| cdf(p)).collect();
    let at_left: Vec<f64> = params.iter().map(|&p| cdf_left(p)).collect();

    for (k, (&fx, &fl)) in at_x.iter().zip(&at_left).enumerate() {
        if !(0.0..=1.0).contains(&fx) || !(0.0..=1.0).contains(&fl) {
            return Err(Error::InvalidCdf(format!(
                "cdf left [0, 1] at xi = {}: F(x) = {fx}, F(x-) = {fl}",
                params[k]
            )));
        }
        if fl > fx + 1e-12 {
            return Err(Error::InvalidCdf(format!(
                "F(x-, xi) = {fl} exceeds F(x, xi) = {fx} at xi = {}; cdf not monotone in x",
                params[k]
            )));
        }
    }

    let direction = detect_direction(&at_x, &at_left, &params)?;
    let n = params.len();
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut half = Vec::with_capacity(n);
    for k in 0..n {
        let (lo, hi) = match direction {
            MonotoneDirection::Decreasing => (1.0 - at_x[k], 1.0 - at_left[k]),
            MonotoneDirection::Increasing => (at_left[k], at_x[k]),
        };
        lower.push(lo);
        upper.push(hi);
        half.push(0.5 * (lo + hi));
    }
    Ok(DiscreteFiducialBounds { params, lower, upper, half, direction })
}

/// Envelope for a [`DiscreteModel`] at observed lattice value `x`.
pub fn discrete_bounds(
    model: &dyn DiscreteModel,
    x: i64,
    grid: &ParameterGrid,
) -> Result<DiscreteFiducialBounds> {
    discrete_bounds_fn(&|p| model.cdf(x, &[p]), &|p| model.cdf_left(x, &[p]), grid)
}

/// Direction of a single curve: `Ok(None)` when constant on the grid.
fn curve_direction(curve: &[f64], params: &[f64]) -> Result<Option<MonotoneDirection>> {
    let tol = 1e-12;
    let mut increasing = true;
    let mut decreasing = true;
    for w in curve.windows(2) {
        if w[1] > w[0] + tol {
            decreasing = false;
        }
        if w[1] < w[0] - tol {
            increasing = false;
        }
    }
    match (increasing, decreasing) {
        (true, false) => Ok(Some(MonotoneDirection::Increasing)),
        (false, true) => Ok(Some(MonotoneDirection::Decreasing)),
        (true, true) => Ok(None),
        (false, false) => Err(Error::NotMonotone(format!(
            "F(x, xi) changes direction on the grid [{}, {}]",
            params[0],
            params[params.len() - 1]
        ))),
    }
}

/// Direction in xi, using `F(x, .)` and falling back to `F(x-, .)` when the
/// observed value sits at an edge of the support where one curve is flat.
fn detect_direction(at_x: &[f64], at_left: &[f64], params: &[f64]) -> Result<MonotoneDirection> {
    let dx = curve_direction(at_x, params)?;
    let dl = curve_direction(at_left, params)?;
    match (dx, dl) {
        (Some(a), Some(b)) if a == b => Ok(a),
        (Some(_), Some(_)) => Err(Error::NotMonotone(
            "F(x, xi) and F(x-, xi) move in opposite directions in xi".into(),
        )),
        (Some(a), None) => Ok(a),
        (None, Some(b)) => Ok(b),
        (None, None) => Err(Error::NotMonotone(
            "F(x, xi) is constant in xi on the grid; direction is undefined".into(),
        )),
    }
}

impl DiscreteFiducialBounds {
    /// Interpolated xi solving `curve(xi) = q` for a monotone nondecreasing
    /// curve tabulated on `params`.
    fn invert_curve(&self, curve: &[f64], q: f64) -> Result<f64> {
        let n = curve.len();
        if q < curve[0] || q > curve[n - 1] {
            return Err(Error::QuantileOutOfRange { level: q });
        }
        let k = curve.partition_point(|&c| c < q);
        if k == 0 {
            return Ok(self.params[0]);
        }
        let (c0, c1) = (curve[k - 1], curve[k]);
        let frac = if c1 > c0 { (q - c0) / (c1 - c0) } else { 0.5 };
        Ok(self.params[k - 1] + frac * (self.params[k] - self.params[k - 1]))
    }

    /// Quantile of the half-corrected CDF.
    pub fn half_quantile(&self, q: f64) -> Result<f64> {
        self.invert_curve(&self.half, q)
    }

    /// Interpolated half-corrected CDF value at `xi`.
    pub fn half_at(&self, xi: f64) -> f64 {
        interp(&self.params, &self.half, xi)
    }

    pub fn lower_at(&self, xi: f64) -> f64 {
        interp(&self.params, &self.lower, xi)
    }

    pub fn upper_at(&self, xi: f64) -> f64 {
        interp(&self.params, &self.upper, xi)
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let k = xs.partition_point(|&v| v <= x) - 1;
    let frac = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + frac * (ys[k + 1] - ys[k])
}

/// Equal-tailed parameter interval from the half-corrected CDF, plus the
/// conservative interval read off the envelope (upper bound for the lower
/// endpoint, lower bound for the upper endpoint).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiscreteInterval {
    pub half: (f64, f64),
    pub envelope: (f64, f64),
    pub level: f64,
}

pub fn half_corrected_interval(
    bounds: &DiscreteFiducialBounds,
    level: f64,
) -> Result<DiscreteInterval> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level must be in (0,1), got {level}"
        )));
    }
    let alpha = 1.0 - level;
    let half = (bounds.half_quantile(alpha / 2.0)?, bounds.half_quantile(1.0 - alpha / 2.0)?);
    // H+ >= H >= H- pointwise, so inverting H+ gives the smaller quantile.
    let envelope = (
        bounds.invert_curve(&bounds.upper, alpha / 2.0)?,
        bounds.invert_curve(&bounds.lower, 1.0 - alpha / 2.0)?,
    );
    Ok(DiscreteInterval { half, envelope, level })
}

/// Geometric observed at `N = n` versus binomial `(n, p)` observed at
/// `X = 1`: two experiments with proportional likelihoods. The report
/// carries both envelopes on a common grid together with their sup-norm
/// gaps and widths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlpViolationReport {
    pub n: usize,
    pub geometric: DiscreteFiducialBounds,
    pub binomial: DiscreteFiducialBounds,
    /// `sup_p |H_G^+ - H_B^+|`; zero, the upper bounds coincide.
    pub sup_gap_upper: f64,
    /// `sup_p |H_G^- - H_B^-|`.
    pub sup_gap_lower: f64,
    /// `sup_p |H_G - H_B|` for the half-corrected CDFs.
    pub sup_gap_half: f64,
    /// `max_p` envelope widths for each model.
    pub max_width_geometric: f64,
    pub max_width_binomial: f64,
}

/// Runs the comparison on a shared parameter grid.
pub fn slp_violation_demo(n: usize, grid: &ParameterGrid) -> Result<SlpViolationReport> {
    if n < 2 {
        return Err(Error::InvalidArgument("the comparison needs n >= 2".into()));
    }
    let geo = crate::model::make_geometric();
    let bin = crate::model::make_binomial(n)?;
    let gb = discrete_bounds(&geo, n as i64, grid)?;
    let bb = discrete_bounds(&bin, 1, grid)?;

    let sup = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0f64, f64::max)
    };
    let width = |b: &DiscreteFiducialBounds| {
        b.upper.iter().zip(&b.lower).map(|(u, l)| u - l).fold(0.0f64, f64::max)
    };
    let report = SlpViolationReport {
        n,
        sup_gap_upper: sup(&gb.upper, &bb.upper),
        sup_gap_lower: sup(&gb.lower, &bb.lower),
        sup_gap_half: sup(&gb.half, &bb.half),
        max_width_geometric: width(&gb),
        max_width_binomial: width(&bb),
        geometric: gb,
        binomial: bb,
    };
    Ok(report)
}
