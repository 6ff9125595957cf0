//! Data-generating equations.
//!
//! A model is a map `X = G(U, xi)` where the law of the noise `U` is fixed
//! and free of the parameter `xi`. Everything else in the crate — Jacobian
//! weights, tabulated densities, epsilon-limit samplers — consumes models
//! through the [`Dge`] trait. Values are immutable after construction and
//! noise sampling takes a caller-owned RNG, so models can be shared across
//! worker threads freely.

mod config;
mod discrete;
mod normal;
mod statistic;
mod two_instrument;

pub use config::{BuiltinModel, DiscreteDge, GridConfig, ModelConfig, ModelKind, ParamSpaceConfig};
pub use discrete::{make_binomial, make_geometric, Binomial, DiscreteModel, Geometric};
pub use normal::{
    location_scale_jacobian_closed_form, make_normal_location, make_normal_location_scale,
    NormalLocation, NormalLocationScale,
};
pub use statistic::{Configuration, FnStatistic, MeanAndSd, SampleMean, Statistic};
pub use two_instrument::{make_two_instrument, make_two_instrument_marginal, TwoInstrument};

use rand::RngCore;

use crate::grid::ParamBox;
use crate::linalg::{fd_step, Mat};

/// A data-generating equation `X = G(U, xi)`.
///
/// Required surface: dimensions, the parameter box, the forward map, and the
/// noise sampler. Optional capabilities (inverse map, analytic derivative,
/// likelihood, exact-fit solve) unlock the corresponding operations; when the
/// analytic derivative is absent, callers fall back to central finite
/// differences via [`d_forward_d_xi`].
pub trait Dge: Sync {
    /// Short identifier recorded in sample metadata and reports.
    fn model_id(&self) -> String;

    /// Data dimension n.
    fn data_dim(&self) -> usize;

    /// Parameter dimension p.
    fn param_dim(&self) -> usize;

    /// Dimension of the noise vector U (may differ from n).
    fn noise_dim(&self) -> usize;

    /// Box constraints on xi.
    fn param_space(&self) -> &ParamBox;

    /// The forward map `G(u, xi)`.
    fn forward(&self, u: &[f64], xi: &[f64]) -> Vec<f64>;

    /// Allocation-free forward map for hot loops; `out` has length n.
    fn forward_into(&self, u: &[f64], xi: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.forward(u, xi));
    }

    /// One draw of U. The law is fixed by the model and never depends on xi.
    fn sample_noise(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// Whether the model carries an inverse map `u = G^{-1}(x, xi)`.
    fn has_inverse(&self) -> bool {
        false
    }

    /// Inverse map; `None` when it fails at this particular `(x, xi)`.
    fn inverse(&self, _x: &[f64], _xi: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Analytic `n x p` derivative of the forward map in xi, at fixed u.
    fn analytic_d_forward_d_xi(&self, _u: &[f64], _xi: &[f64]) -> Option<Mat> {
        None
    }

    /// Log likelihood of the data under xi, when the model exposes one.
    fn log_likelihood(&self, _x: &[f64], _xi: &[f64]) -> Option<f64> {
        None
    }

    /// For models where `min_xi ||x - G(u, xi)|| = 0` has positive
    /// probability: the zero-residual argmin for this noise draw, or `None`
    /// when this `u` admits none (inside the declared parameter box).
    fn exact_fit(&self, _x: &[f64], _u: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// `n x p` derivative of the forward map in xi: analytic when the model
/// provides it, otherwise central finite differences with per-coordinate
/// step `1e-6 * (1 + |xi_j|)`.
pub fn d_forward_d_xi(dge: &dyn Dge, u: &[f64], xi: &[f64]) -> (Mat, DerivMethod) {
    if let Some(m) = dge.analytic_d_forward_d_xi(u, xi) {
        debug_assert_eq!(m.rows(), dge.data_dim());
        debug_assert_eq!(m.cols(), dge.param_dim());
        return (m, DerivMethod::Analytic);
    }
    (fd_d_forward_d_xi(dge, u, xi), DerivMethod::FiniteDifference)
}

/// Central-difference derivative of the forward map (the fallback path,
/// exposed separately so tests can compare it against analytic derivatives).
pub fn fd_d_forward_d_xi(dge: &dyn Dge, u: &[f64], xi: &[f64]) -> Mat {
    let n = dge.data_dim();
    let mut jac = Mat::zeros(n, xi.len());
    let mut point = xi.to_vec();
    for j in 0..xi.len() {
        let h = fd_step(xi[j]);
        point[j] = xi[j] + h;
        let fp = dge.forward(u, &point);
        point[j] = xi[j] - h;
        let fm = dge.forward(u, &point);
        point[j] = xi[j];
        for i in 0..n {
            jac.set(i, j, (fp[i] - fm[i]) / (2.0 * h));
        }
    }
    jac
}

/// How a derivative matrix was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DerivMethod {
    Analytic,
    FiniteDifference,
}
