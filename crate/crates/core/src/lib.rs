//! Generalized fiducial distributions.
//!
//! Builds distributions on parameter spaces by inverting data-generating
//! equations `X = G(U, xi)`:
//!
//! - [`sampler`] — the epsilon-limit Monte Carlo definition: rejection
//!   sampling on `||x - G(U*, xi)||` with grid-based argmin search, exact
//!   zero-residual conditioning where the model admits it, and inverse-CDF
//!   draws from tabulated densities.
//! - [`jacobian`] — the subdeterminant-sum weight of the closed-form density
//!   and its sufficiency-specialized single-determinant form.
//! - [`density`] — tabulated Jacobian-weighted densities on rectangular
//!   grids, the classical single-observation fiducial density, and quantile
//!   queries.
//! - [`discrete`] — distribution-function envelopes and half-corrected CDFs
//!   for lattice models, with the geometric-versus-binomial comparison.
//! - [`principles`] — numerical checkers for conditionality, likelihood
//!   separability, and the sequential-stopping likelihood-principle pair.
//! - [`coverage`] — frequentist repetition engine for fiducial interval
//!   coverage.

pub mod coverage;
pub mod density;
pub mod discrete;
pub mod error;
pub mod export;
pub mod grid;
pub mod jacobian;
pub mod linalg;
pub mod model;
pub mod principles;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
