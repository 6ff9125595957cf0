//! The two-instrument measurement model.
//!
//! A fair coin picks one of two instruments with known spreads
//! `sigma1 < sigma2`, then the chosen instrument measures `theta` with
//! Gaussian error:
//!
//! ```text
//! M = 1 + 1{U < 1/2},   X = theta + sigma_M * Z,
//! ```
//!
//! with `U ~ Uniform(0,1)` and `Z ~ N(0,1)` independent. Two data variants
//! exist: the instrument label observed alongside the measurement (data
//! `(x, m)`), or the measurement alone.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::ParamBox;

use super::Dge;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DataVariant {
    /// Data is the pair `(x, m)`.
    Observed,
    /// Data is `x` alone; the label is latent.
    Marginal,
}

/// Two-instrument model; see the module docs. p = 1 (the measurand theta).
#[derive(Debug, Clone)]
pub struct TwoInstrument {
    sigma1: f64,
    sigma2: f64,
    variant: DataVariant,
    space: ParamBox,
}

fn validate_sigmas(sigma1: f64, sigma2: f64) -> Result<()> {
    if !(sigma1 > 0.0 && sigma2 > 0.0 && sigma1 < sigma2) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < sigma1 < sigma2, got sigma1={sigma1}, sigma2={sigma2}"
        )));
    }
    Ok(())
}

fn default_space() -> ParamBox {
    ParamBox::new(vec![-200.0], vec![200.0]).unwrap()
}

/// Variant with the instrument label observed: data `(x, m)`.
pub fn make_two_instrument(sigma1: f64, sigma2: f64) -> Result<TwoInstrument> {
    validate_sigmas(sigma1, sigma2)?;
    Ok(TwoInstrument { sigma1, sigma2, variant: DataVariant::Observed, space: default_space() })
}

/// Variant with the label unobserved: data `x` alone.
pub fn make_two_instrument_marginal(sigma1: f64, sigma2: f64) -> Result<TwoInstrument> {
    validate_sigmas(sigma1, sigma2)?;
    Ok(TwoInstrument { sigma1, sigma2, variant: DataVariant::Marginal, space: default_space() })
}

impl TwoInstrument {
    pub fn with_param_space(mut self, space: ParamBox) -> Result<Self> {
        if space.dim() != 1 {
            return Err(Error::Dimension("two-instrument model has p = 1".into()));
        }
        self.space = space;
        Ok(self)
    }

    pub fn sigma(&self, machine: usize) -> f64 {
        match machine {
            1 => self.sigma1,
            2 => self.sigma2,
            _ => panic!("machine index must be 1 or 2"),
        }
    }

    fn machine_of(u01: f64) -> usize {
        if u01 < 0.5 {
            1
        } else {
            2
        }
    }
}

impl Dge for TwoInstrument {
    fn model_id(&self) -> String {
        let tag = match self.variant {
            DataVariant::Observed => "observed",
            DataVariant::Marginal => "marginal",
        };
        format!("two-instrument-{tag}(s1={},s2={})", self.sigma1, self.sigma2)
    }

    fn data_dim(&self) -> usize {
        match self.variant {
            DataVariant::Observed => 2,
            DataVariant::Marginal => 1,
        }
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        2
    }

    fn param_space(&self) -> &ParamBox {
        &self.space
    }

    fn forward(&self, u: &[f64], xi: &[f64]) -> Vec<f64> {
        let machine = Self::machine_of(u[0]);
        let x = xi[0] + self.sigma(machine) * u[1];
        match self.variant {
            DataVariant::Observed => vec![x, machine as f64],
            DataVariant::Marginal => vec![x],
        }
    }

    fn sample_noise(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let u01: f64 = rng.random();
        let z: f64 = StandardNormal.sample(rng);
        vec![u01, z]
    }

    fn log_likelihood(&self, x: &[f64], xi: &[f64]) -> Option<f64> {
        let theta = xi[0];
        let dens = |sigma: f64| {
            let z = (x[0] - theta) / sigma;
            (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        };
        let f = match self.variant {
            DataVariant::Observed => {
                let machine = x[1] as usize;
                0.5 * dens(self.sigma(machine))
            }
            DataVariant::Marginal => 0.5 * dens(self.sigma1) + 0.5 * dens(self.sigma2),
        };
        Some(f.ln())
    }

    fn exact_fit(&self, x: &[f64], u: &[f64]) -> Option<Vec<f64>> {
        let machine = Self::machine_of(u[0]);
        match self.variant {
            DataVariant::Observed => {
                // The label carries no parameter freedom: the residual can
                // only vanish when the simulated label matches the observed
                // one, and then theta = x - sigma_m z fits x exactly.
                let observed_machine = x[1] as usize;
                if machine != observed_machine {
                    return None;
                }
                let theta = x[0] - self.sigma(machine) * u[1];
                self.space.contains(&[theta]).then(|| vec![theta])
            }
            DataVariant::Marginal => {
                let theta = x[0] - self.sigma(machine) * u[1];
                self.space.contains(&[theta]).then(|| vec![theta])
            }
        }
    }
}
