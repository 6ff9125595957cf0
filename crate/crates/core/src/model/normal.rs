//! Gaussian location and location-scale models.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::ParamBox;
use crate::linalg::Mat;

use super::Dge;

/// `X_i = theta + U_i` with `U_i` iid standard normal; p = 1.
#[derive(Debug, Clone)]
pub struct NormalLocation {
    n: usize,
    space: ParamBox,
}

/// Location model with `n` observations and the default box `theta in [-25, 25]`.
pub fn make_normal_location(n: usize) -> Result<NormalLocation> {
    if n == 0 {
        return Err(Error::InvalidArgument("data dimension n must be >= 1".into()));
    }
    Ok(NormalLocation { n, space: ParamBox::new(vec![-25.0], vec![25.0])? })
}

impl NormalLocation {
    pub fn with_param_space(mut self, space: ParamBox) -> Result<Self> {
        if space.dim() != 1 {
            return Err(Error::Dimension("location model has p = 1".into()));
        }
        self.space = space;
        Ok(self)
    }
}

impl Dge for NormalLocation {
    fn model_id(&self) -> String {
        format!("normal-location(n={})", self.n)
    }

    fn data_dim(&self) -> usize {
        self.n
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        self.n
    }

    fn param_space(&self) -> &ParamBox {
        &self.space
    }

    fn forward(&self, u: &[f64], xi: &[f64]) -> Vec<f64> {
        u.iter().map(|&ui| xi[0] + ui).collect()
    }

    fn forward_into(&self, u: &[f64], xi: &[f64], out: &mut [f64]) {
        for (o, &ui) in out.iter_mut().zip(u) {
            *o = xi[0] + ui;
        }
    }

    fn sample_noise(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.n).map(|_| StandardNormal.sample(rng)).collect()
    }

    fn has_inverse(&self) -> bool {
        true
    }

    fn inverse(&self, x: &[f64], xi: &[f64]) -> Option<Vec<f64>> {
        Some(x.iter().map(|&v| v - xi[0]).collect())
    }

    fn analytic_d_forward_d_xi(&self, _u: &[f64], _xi: &[f64]) -> Option<Mat> {
        Some(Mat::from_rows(vec![vec![1.0]; self.n]))
    }

    fn log_likelihood(&self, x: &[f64], xi: &[f64]) -> Option<f64> {
        let theta = xi[0];
        let ln_norm = 0.5 * (2.0 * std::f64::consts::PI).ln();
        Some(x.iter().map(|&v| -0.5 * (v - theta) * (v - theta) - ln_norm).sum())
    }

    fn exact_fit(&self, x: &[f64], u: &[f64]) -> Option<Vec<f64>> {
        // A single observation is fit exactly by theta = x - u.
        if self.n != 1 {
            return None;
        }
        let theta = x[0] - u[0];
        self.space.contains(&[theta]).then(|| vec![theta])
    }
}

/// `X_i = mu + sigma * U_i` with `U_i` iid standard normal; xi = (mu, sigma), p = 2.
///
/// Positivity of sigma is enforced through the parameter box.
#[derive(Debug, Clone)]
pub struct NormalLocationScale {
    n: usize,
    space: ParamBox,
}

/// Location-scale model with `n` observations; default box
/// `mu in [-25, 25]`, `sigma in [1e-3, 25]`.
pub fn make_normal_location_scale(n: usize) -> Result<NormalLocationScale> {
    if n == 0 {
        return Err(Error::InvalidArgument("data dimension n must be >= 1".into()));
    }
    Ok(NormalLocationScale { n, space: ParamBox::new(vec![-25.0, 1e-3], vec![25.0, 25.0])? })
}

impl NormalLocationScale {
    pub fn with_param_space(mut self, space: ParamBox) -> Result<Self> {
        if space.dim() != 2 {
            return Err(Error::Dimension("location-scale model has p = 2".into()));
        }
        if space.lo()[1] <= 0.0 {
            return Err(Error::InvalidArgument(
                "sigma lower bound must be positive".into(),
            ));
        }
        self.space = space;
        Ok(self)
    }

    /// Log likelihood of an n-vector under `(mu, sigma)`.
    pub fn log_likelihood_at(&self, x: &[f64], mu: f64, sigma: f64) -> f64 {
        let ln_norm = 0.5 * (2.0 * std::f64::consts::PI).ln();
        x.iter()
            .map(|&v| {
                let z = (v - mu) / sigma;
                -0.5 * z * z - sigma.ln() - ln_norm
            })
            .sum()
    }
}

impl Dge for NormalLocationScale {
    fn model_id(&self) -> String {
        format!("normal-ls(n={})", self.n)
    }

    fn data_dim(&self) -> usize {
        self.n
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn noise_dim(&self) -> usize {
        self.n
    }

    fn param_space(&self) -> &ParamBox {
        &self.space
    }

    fn forward(&self, u: &[f64], xi: &[f64]) -> Vec<f64> {
        let (mu, sigma) = (xi[0], xi[1]);
        u.iter().map(|&ui| mu + sigma * ui).collect()
    }

    fn forward_into(&self, u: &[f64], xi: &[f64], out: &mut [f64]) {
        let (mu, sigma) = (xi[0], xi[1]);
        for (o, &ui) in out.iter_mut().zip(u) {
            *o = mu + sigma * ui;
        }
    }

    fn sample_noise(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.n).map(|_| StandardNormal.sample(rng)).collect()
    }

    fn has_inverse(&self) -> bool {
        true
    }

    fn inverse(&self, x: &[f64], xi: &[f64]) -> Option<Vec<f64>> {
        let (mu, sigma) = (xi[0], xi[1]);
        if sigma <= 0.0 {
            return None;
        }
        Some(x.iter().map(|&v| (v - mu) / sigma).collect())
    }

    fn analytic_d_forward_d_xi(&self, u: &[f64], _xi: &[f64]) -> Option<Mat> {
        // d(mu + sigma u_i)/d(mu, sigma) = (1, u_i)
        Some(Mat::from_rows(u.iter().map(|&ui| vec![1.0, ui]).collect()))
    }

    fn log_likelihood(&self, x: &[f64], xi: &[f64]) -> Option<f64> {
        if xi[1] <= 0.0 {
            return None;
        }
        Some(self.log_likelihood_at(x, xi[0], xi[1]))
    }
}

/// Closed-form Jacobian weight of the location-scale model:
/// `sum_{i<j} |x_i - x_j| / sigma`.
///
/// Used as an independent oracle against the generic subdeterminant sum.
pub fn location_scale_jacobian_closed_form(x: &[f64], sigma: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            total += (x[i] - x[j]).abs();
        }
    }
    total / sigma
}
