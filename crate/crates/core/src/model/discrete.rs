//! Discrete models built from the inverse-CDF data-generating equation
//! `X = F^{-1}(U, xi) = inf{x : F(x, xi) >= u}` with `U ~ Uniform(0,1)`.
//!
//! On integer supports the left limit `F(x-, xi)` is `F(x - 1, xi)`.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::grid::ParamBox;

use super::Dge;

/// Lattice CDF access for discrete models.
pub trait DiscreteModel: Sync {
    /// `F(x, xi) = P(X <= x)`.
    fn cdf(&self, x: i64, xi: &[f64]) -> f64;

    /// Left limit `F(x-, xi)`; on the integer lattice this is `F(x-1, xi)`.
    fn cdf_left(&self, x: i64, xi: &[f64]) -> f64 {
        if x <= self.support_min() {
            0.0
        } else {
            self.cdf(x - 1, xi)
        }
    }

    fn support_min(&self) -> i64;

    /// `None` for unbounded supports.
    fn support_max(&self) -> Option<i64>;

    /// Inverse CDF `inf{x : F(x, xi) >= u}`.
    fn quantile(&self, u: f64, xi: &[f64]) -> i64;
}

fn unit_interval_space() -> ParamBox {
    // The closed forms degenerate at p = 0 and p = 1; keep a small margin.
    ParamBox::new(vec![1e-6], vec![1.0 - 1e-6]).unwrap()
}

/// Geometric(p): number of Bernoulli trials up to and including the first
/// success. Support {1, 2, ...}, `F(x, p) = 1 - (1-p)^x`.
#[derive(Debug, Clone)]
pub struct Geometric {
    space: ParamBox,
}

pub fn make_geometric() -> Geometric {
    Geometric { space: unit_interval_space() }
}

impl DiscreteModel for Geometric {
    fn cdf(&self, x: i64, xi: &[f64]) -> f64 {
        if x < 1 {
            0.0
        } else {
            1.0 - (1.0 - xi[0]).powi(x.min(i32::MAX as i64) as i32)
        }
    }

    fn support_min(&self) -> i64 {
        1
    }

    fn support_max(&self) -> Option<i64> {
        None
    }

    fn quantile(&self, u: f64, xi: &[f64]) -> i64 {
        let p = xi[0];
        if u <= 0.0 {
            return 1;
        }
        // Candidate from the closed form, then correct for rounding so that
        // the infimum definition holds exactly in floating point.
        let raw = (1.0 - u).ln() / (1.0 - p).ln();
        let mut x = raw.ceil().max(1.0) as i64;
        while x > 1 && self.cdf(x - 1, xi) >= u {
            x -= 1;
        }
        while self.cdf(x, xi) < u {
            x += 1;
        }
        x
    }
}

impl Dge for Geometric {
    fn model_id(&self) -> String {
        "geometric".into()
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
        &self.space
    }

    fn forward(&self, u: &[f64], xi: &[f64]) -> Vec<f64> {
        vec![self.quantile(u[0], xi) as f64]
    }

    fn sample_noise(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        vec![rng.random()]
    }

    fn log_likelihood(&self, x: &[f64], xi: &[f64]) -> Option<f64> {
        let n = x[0] as i64;
        if n < 1 {
            return Some(f64::NEG_INFINITY);
        }
        let p = xi[0];
        Some(p.ln() + (n - 1) as f64 * (1.0 - p).ln())
    }
}

/// Binomial(n, p) on support {0, ..., n}.
#[derive(Debug, Clone)]
pub struct Binomial {
    n_trials: usize,
    space: ParamBox,
}

pub fn make_binomial(n_trials: usize) -> Result<Binomial> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("binomial needs n >= 1 trials".into()));
    }
    Ok(Binomial { n_trials, space: unit_interval_space() })
}

impl Binomial {
    pub fn n_trials(&self) -> usize {
        self.n_trials
    }

    /// pmf via the multiplicative recurrence; exact enough for lattice sizes
    /// used here and free of factorial overflow.
    fn pmf(&self, k: usize, p: f64) -> f64 {
        let n = self.n_trials as f64;
        let q = 1.0 - p;
        let mut value = q.powi(self.n_trials as i32);
        for j in 0..k {
            value *= (n - j as f64) / (j as f64 + 1.0) * (p / q);
        }
        value
    }
}

impl DiscreteModel for Binomial {
    fn cdf(&self, x: i64, xi: &[f64]) -> f64 {
        if x < 0 {
            return 0.0;
        }
        if x >= self.n_trials as i64 {
            return 1.0;
        }
        let p = xi[0];
        let q = 1.0 - p;
        let n = self.n_trials as f64;
        let mut term = q.powi(self.n_trials as i32);
        let mut total = term;
        for k in 0..x as usize {
            term *= (n - k as f64) / (k as f64 + 1.0) * (p / q);
            total += term;
        }
        total.min(1.0)
    }

    fn support_min(&self) -> i64 {
        0
    }

    fn support_max(&self) -> Option<i64> {
        Some(self.n_trials as i64)
    }

    fn quantile(&self, u: f64, xi: &[f64]) -> i64 {
        for x in 0..self.n_trials as i64 {
            if self.cdf(x, xi) >= u {
                return x;
            }
        }
        self.n_trials as i64
    }
}

impl Dge for Binomial {
    fn model_id(&self) -> String {
        format!("binomial(n={})", self.n_trials)
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
        &self.space
    }

    fn forward(&self, u: &[f64], xi: &[f64]) -> Vec<f64> {
        vec![self.quantile(u[0], xi) as f64]
    }

    fn sample_noise(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        vec![rng.random()]
    }

    fn log_likelihood(&self, x: &[f64], xi: &[f64]) -> Option<f64> {
        let k = x[0] as usize;
        if k > self.n_trials {
            return Some(f64::NEG_INFINITY);
        }
        Some(self.pmf(k, xi[0]).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn geometric_forward_hand_values() {
        let g = make_geometric();
        // F(1, 0.5) = 0.5 >= 0.5 and 1 is the smallest such x.
        assert_eq!(g.forward(&[0.5], &[0.5]), vec![1.0]);
        // u -> 0+ gives the bottom of the support for any p.
        for &p in &[0.1, 0.5, 0.9] {
            assert_eq!(g.forward(&[1e-300], &[p]), vec![1.0]);
            assert_eq!(g.forward(&[0.0], &[p]), vec![1.0]);
        }
    }

    #[test]
    fn binomial_forward_against_exact_cdf_table() {
        let b = make_binomial(3).unwrap();
        // Exact CDF at p = 0.5: (0.125, 0.5, 0.875, 1.0).
        assert_relative_eq!(b.cdf(0, &[0.5]), 0.125, max_relative = 1e-14);
        assert_relative_eq!(b.cdf(1, &[0.5]), 0.5, max_relative = 1e-14);
        assert_relative_eq!(b.cdf(2, &[0.5]), 0.875, max_relative = 1e-14);
        assert_relative_eq!(b.cdf(3, &[0.5]), 1.0, max_relative = 1e-14);
        // Smallest x with F(x, 0.5) >= 0.99 is 3.
        assert_eq!(b.forward(&[0.99], &[0.5]), vec![3.0]);
        assert_eq!(b.forward(&[0.4], &[0.5]), vec![1.0]);
    }

    #[test]
    fn rejects_zero_trials() {
        assert!(make_binomial(0).is_err());
    }

    #[test]
    fn geometric_simulated_law_matches_cdf() {
        let g = make_geometric();
        let p = 0.4;
        let mut rng = substream(31, 0);
        let mut counts = std::collections::BTreeMap::new();
        let draws = 100_000usize;
        for _ in 0..draws {
            let u = g.sample_noise(&mut rng);
            let x = g.forward(&u, &[p])[0] as i64;
            *counts.entry(x).or_insert(0usize) += 1;
        }
        // Discrete KS against the closed-form CDF.
        let mut cum = 0.0;
        let mut worst: f64 = 0.0;
        for (&x, &c) in &counts {
            cum += c as f64 / draws as f64;
            worst = worst.max((cum - g.cdf(x, &[p])).abs());
        }
        assert!(worst < 0.01, "KS = {worst}");
    }

    #[test]
    fn binomial_simulated_law_matches_cdf() {
        let b = make_binomial(5).unwrap();
        let p = 0.3;
        let mut rng = substream(32, 0);
        let draws = 100_000usize;
        let mut counts = vec![0usize; 6];
        for _ in 0..draws {
            let u = b.sample_noise(&mut rng);
            counts[b.forward(&u, &[p])[0] as usize] += 1;
        }
        let mut cum = 0.0;
        for (x, &c) in counts.iter().enumerate() {
            cum += c as f64 / draws as f64;
            assert!(
                (cum - b.cdf(x as i64, &[p])).abs() < 0.01,
                "x = {x}: {cum} vs {}",
                b.cdf(x as i64, &[p])
            );
        }
    }

    proptest! {
        #[test]
        fn geometric_quantile_is_the_infimum(u in 1e-9f64..0.999999, p in 0.01f64..0.99) {
            let g = make_geometric();
            let x = g.quantile(u, &[p]);
            prop_assert!(g.cdf(x, &[p]) >= u);
            prop_assert!(g.cdf(x - 1, &[p]) < u);
        }

        #[test]
        fn binomial_quantile_is_the_infimum(u in 1e-9f64..1.0, p in 0.01f64..0.99, n in 1usize..12) {
            let b = make_binomial(n).unwrap();
            let x = b.quantile(u, &[p]);
            prop_assert!(b.cdf(x, &[p]) >= u || x == n as i64);
            if x > 0 {
                prop_assert!(b.cdf(x - 1, &[p]) < u);
            }
        }
    }
}
