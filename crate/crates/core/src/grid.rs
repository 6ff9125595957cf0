//! Rectangular parameter-space discretizations.
//!
//! A [`ParameterGrid`] covers a finite box with equal-width cells per axis;
//! nodes sit at cell midpoints so that `sum(values) * cell_volume` is the
//! midpoint-rule quadrature of a tabulated function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite box constraints on a parameter vector, one `[lo, hi]` pair per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Dimension(format!(
                "box bounds must be nonempty and of equal length, got {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() || l >= h {
                return Err(Error::InvalidArgument(format!(
                    "coordinate {i}: need finite lo < hi, got [{l}, {h}]"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, xi: &[f64]) -> bool {
        xi.len() == self.dim()
            && xi
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&x, (&l, &h))| x >= l && x <= h)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| 0.5 * (l + h)).collect()
    }

    pub fn clamp(&self, xi: &mut [f64]) {
        for ((x, &l), &h) in xi.iter_mut().zip(&self.lo).zip(&self.hi) {
            *x = x.clamp(l, h);
        }
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| h - l).product()
    }
}

/// One axis of a [`ParameterGrid`]: `count` equal cells over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidArgument(format!(
                "grid axis needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        if count == 0 {
            return Err(Error::InvalidArgument("grid axis needs count >= 1".into()));
        }
        Ok(Self { lo, hi, count })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.count as f64
    }

    /// Midpoint of cell `i`.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.count);
        self.lo + (i as f64 + 0.5) * self.step()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }
}

/// Midpoint grid over a rectangular parameter box.
///
/// Flattened node order is row-major with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    axes: Vec<GridAxis>,
}

impl ParameterGrid {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one axis".into()));
        }
        Ok(Self { axes })
    }

    /// Grid over `pbox` with `counts[i]` cells along axis `i`.
    pub fn from_box(pbox: &ParamBox, counts: &[usize]) -> Result<Self> {
        if counts.len() != pbox.dim() {
            return Err(Error::Dimension(format!(
                "got {} counts for a {}-dimensional box",
                counts.len(),
                pbox.dim()
            )));
        }
        let axes = pbox
            .lo()
            .iter()
            .zip(pbox.hi())
            .zip(counts)
            .map(|((&l, &h), &c)| GridAxis::new(l, h, c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(axes)
    }

    /// Convenience 1-d constructor.
    pub fn line(lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(vec![GridAxis::new(lo, hi, count)?])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn axis(&self, a: usize) -> &GridAxis {
        &self.axes[a]
    }

    /// Total number of nodes (= product of per-axis counts).
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.step()).product()
    }

    pub fn bounding_box(&self) -> ParamBox {
        ParamBox::new(
            self.axes.iter().map(|a| a.lo).collect(),
            self.axes.iter().map(|a| a.hi).collect(),
        )
        .expect("grid axes form a valid box")
    }

    /// Per-axis cell indices of flattened node `flat`.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.axes[a].count;
            flat /= self.axes[a].count;
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        let mut flat = 0usize;
        for (a, &i) in idx.iter().enumerate() {
            flat = flat * self.axes[a].count + i;
        }
        flat
    }

    /// Coordinates of flattened node `flat`.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, ax)| ax.node(i))
            .collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |f| self.node(f))
    }

    /// Same box with every axis count doubled (used by quadrature stability checks).
    pub fn refined_double(&self) -> Self {
        Self {
            axes: self
                .axes
                .iter()
                .map(|a| GridAxis { lo: a.lo, hi: a.hi, count: a.count * 2 })
                .collect(),
        }
    }
}
