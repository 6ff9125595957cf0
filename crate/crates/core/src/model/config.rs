//! Declarative model configuration, deserializable from TOML or JSON.
//!
//! Schema (TOML form; JSON mirrors it):
//!
//! ```toml
//! [model]
//! name = "normal-ls"        # normal-location | normal-ls | two-instrument |
//!                           # two-instrument-marginal | geometric | binomial
//! n = 5                     # normal-location / normal-ls / binomial
//! sigma1 = 1.0              # two-instrument variants
//! sigma2 = 10.0
//!
//! [param_space]             # optional; model defaults otherwise
//! lo = [-5.0, 0.05]
//! hi = [5.0, 4.0]
//!
//! [grid]                    # optional
//! counts = [400, 400]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ParamBox, ParameterGrid};

use super::discrete::{make_binomial, make_geometric, Binomial, DiscreteModel, Geometric};
use super::normal::{
    make_normal_location, make_normal_location_scale, NormalLocation, NormalLocationScale,
};
use super::two_instrument::{make_two_instrument, make_two_instrument_marginal, TwoInstrument};
use super::Dge;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum ModelKind {
    NormalLocation { n: usize },
    NormalLs { n: usize },
    TwoInstrument { sigma1: f64, sigma2: f64 },
    TwoInstrumentMarginal { sigma1: f64, sigma2: f64 },
    Geometric,
    Binomial { n: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ParamSpaceConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: ModelKind,
    #[serde(default)]
    pub param_space: Option<ParamSpaceConfig>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
}

/// A constructed built-in model.
pub enum BuiltinModel {
    NormalLocation(NormalLocation),
    NormalLocationScale(NormalLocationScale),
    TwoInstrument(TwoInstrument),
    Geometric(Geometric),
    Binomial(Binomial),
}

/// Trait-object view combining the generic DGE surface with lattice CDFs.
pub trait DiscreteDge: Dge + DiscreteModel {}
impl<T: Dge + DiscreteModel> DiscreteDge for T {}

impl BuiltinModel {
    pub fn as_dge(&self) -> &dyn Dge {
        match self {
            BuiltinModel::NormalLocation(m) => m,
            BuiltinModel::NormalLocationScale(m) => m,
            BuiltinModel::TwoInstrument(m) => m,
            BuiltinModel::Geometric(m) => m,
            BuiltinModel::Binomial(m) => m,
        }
    }

    pub fn as_discrete(&self) -> Option<&dyn DiscreteDge> {
        match self {
            BuiltinModel::Geometric(m) => Some(m),
            BuiltinModel::Binomial(m) => Some(m),
            _ => None,
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> Result<BuiltinModel> {
        let space = match &self.param_space {
            Some(cfg) => Some(ParamBox::new(cfg.lo.clone(), cfg.hi.clone())?),
            None => None,
        };
        let model = match &self.model {
            ModelKind::NormalLocation { n } => {
                let mut m = make_normal_location(*n)?;
                if let Some(s) = space {
                    m = m.with_param_space(s)?;
                }
                BuiltinModel::NormalLocation(m)
            }
            ModelKind::NormalLs { n } => {
                let mut m = make_normal_location_scale(*n)?;
                if let Some(s) = space {
                    m = m.with_param_space(s)?;
                }
                BuiltinModel::NormalLocationScale(m)
            }
            ModelKind::TwoInstrument { sigma1, sigma2 } => {
                let mut m = make_two_instrument(*sigma1, *sigma2)?;
                if let Some(s) = space {
                    m = m.with_param_space(s)?;
                }
                BuiltinModel::TwoInstrument(m)
            }
            ModelKind::TwoInstrumentMarginal { sigma1, sigma2 } => {
                let mut m = make_two_instrument_marginal(*sigma1, *sigma2)?;
                if let Some(s) = space {
                    m = m.with_param_space(s)?;
                }
                BuiltinModel::TwoInstrument(m)
            }
            ModelKind::Geometric => {
                if space.is_some() {
                    return Err(Error::InvalidArgument(
                        "geometric uses the fixed parameter range (0, 1)".into(),
                    ));
                }
                BuiltinModel::Geometric(make_geometric())
            }
            ModelKind::Binomial { n } => {
                if space.is_some() {
                    return Err(Error::InvalidArgument(
                        "binomial uses the fixed parameter range (0, 1)".into(),
                    ));
                }
                BuiltinModel::Binomial(make_binomial(*n)?)
            }
        };
        Ok(model)
    }

    /// Grid over the model's parameter box using the configured counts.
    pub fn build_grid(&self) -> Result<ParameterGrid> {
        let model = self.build()?;
        let counts = self
            .grid
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("config has no [grid] section".into()))?
            .counts
            .clone();
        ParameterGrid::from_box(model.as_dge().param_space(), &counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_and_build() {
        let cfg: ModelConfig = serde_json::from_str(
            r#"{
                "model": {"name": "normal-ls", "n": 5},
                "param_space": {"lo": [-3.0, 0.1], "hi": [3.0, 4.0]},
                "grid": {"counts": [50, 40]}
            }"#,
        )
        .unwrap();
        let model = cfg.build().unwrap();
        assert_eq!(model.as_dge().data_dim(), 5);
        assert_eq!(model.as_dge().param_space().lo(), &[-3.0, 0.1]);
        let grid = cfg.build_grid().unwrap();
        assert_eq!(grid.len(), 2000);
    }

    #[test]
    fn unknown_model_name_is_rejected_with_its_name() {
        let err = serde_json::from_str::<ModelConfig>(r#"{"model": {"name": "geom"}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("geom"), "message was: {err}");
    }

    #[test]
    fn unknown_section_field_is_rejected() {
        let err = serde_json::from_str::<ModelConfig>(
            r#"{"model": {"name": "geometric"}, "grids": {"counts": [10]}}"#,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("grids"), "message was: {err}");
    }

    #[test]
    fn missing_field_is_reported() {
        let err = serde_json::from_str::<ModelConfig>(r#"{"model": {"name": "binomial"}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains('n'), "message was: {err}");
    }

    #[test]
    fn discrete_view_only_for_lattice_models() {
        let geo = ModelConfig {
            model: ModelKind::Geometric,
            param_space: None,
            grid: None,
        }
        .build()
        .unwrap();
        assert!(geo.as_discrete().is_some());
        let ls = ModelConfig {
            model: ModelKind::NormalLs { n: 2 },
            param_space: None,
            grid: None,
        }
        .build()
        .unwrap();
        assert!(ls.as_discrete().is_none());
    }
}
