//! JSON model descriptors.
//!
//! ```json
//! {
//!   "mu": {"type": "uniform", "lo": -0.2, "hi": 0.2},
//!   "kernel": {"type": "additive", "rho": {"type": "uniform", "lo": -0.4, "hi": 0.4}},
//!   "alpha": [0.4, 0.3, 0.2, 0.1]
//! }
//! ```
//!
//! Validation errors carry the dotted path of the offending field.

use serde::{Deserialize, Serialize};

use crate::asymptotics::CbmSpec;
use crate::error::{CbmError, Result};
use crate::kernels::BiasKernel;
use crate::measures::Measure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    Point {
        at: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// `[location, mass]` pairs.
    Discrete {
        atoms: Vec<[f64; 2]>,
    },
    /// `[lo, hi, mass]` triples.
    UniformMixture {
        intervals: Vec<[f64; 3]>,
    },
    Power {
        t: f64,
        half_width: f64,
    },
    Mixture {
        components: Vec<Component>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub weight: f64,
    pub measure: MeasureConfig,
}

fn at_field(path: &str, e: CbmError) -> CbmError {
    match e {
        CbmError::InvalidMeasure(m) | CbmError::InvalidKernel(m) | CbmError::InvalidModel(m) => {
            CbmError::Config {
                field: path.to_string(),
                message: m,
            }
        }
        CbmError::Config { field, message } if !field.starts_with(path) => CbmError::Config {
            field: format!("{path}.{field}"),
            message,
        },
        other => other,
    }
}

impl MeasureConfig {
    pub fn build(&self, path: &str) -> Result<Measure> {
        let built = match self {
            MeasureConfig::Point { at } => Measure::point(*at),
            MeasureConfig::Uniform { lo, hi } => Measure::uniform(*lo, *hi),
            MeasureConfig::Discrete { atoms } => {
                Measure::discrete(&atoms.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>())
            }
            MeasureConfig::UniformMixture { intervals } => Measure::uniform_mixture(
                &intervals
                    .iter()
                    .map(|p| (p[0], p[1], p[2]))
                    .collect::<Vec<_>>(),
            ),
            MeasureConfig::Power { t, half_width } => Measure::power_tail(*t, *half_width),
            MeasureConfig::Mixture { components } => {
                let parts = components
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        Ok((
                            c.weight,
                            c.measure
                                .build(&format!("{path}.components[{i}].measure"))?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Measure::mixture(&parts)
            }
        };
        built.map_err(|e| at_field(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Constant {
        rho: MeasureConfig,
    },
    Additive {
        rho: MeasureConfig,
    },
    Multiplicative {
        rho: MeasureConfig,
    },
    Beta {
        scale: f64,
        floor: f64,
    },
    Tabulated {
        z_grid: Vec<f64>,
        measures: Vec<MeasureConfig>,
    },
    Reflected {
        inner: Box<KernelConfig>,
    },
}

impl KernelConfig {
    pub fn build(&self, path: &str) -> Result<BiasKernel> {
        let rho_path = format!("{path}.rho");
        let built = match self {
            KernelConfig::Constant { rho } => BiasKernel::constant(rho.build(&rho_path)?),
            KernelConfig::Additive { rho } => BiasKernel::additive(rho.build(&rho_path)?),
            KernelConfig::Multiplicative { rho } => {
                BiasKernel::multiplicative(rho.build(&rho_path)?)
            }
            KernelConfig::Beta { scale, floor } => BiasKernel::beta_polarization(*scale, *floor),
            KernelConfig::Tabulated { z_grid, measures } => {
                let ms = measures
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m.build(&format!("{path}.measures[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                BiasKernel::tabulated(z_grid.clone(), ms)
            }
            KernelConfig::Reflected { inner } => Ok(BiasKernel::reflected(
                inner.build(&format!("{path}.inner"))?,
            )),
        };
        built.map_err(|e| at_field(path, e))
    }

    /// The local bias measure of kernels that have one.
    pub fn rho(&self) -> Option<&MeasureConfig> {
        match self {
            KernelConfig::Constant { rho }
            | KernelConfig::Additive { rho }
            | KernelConfig::Multiplicative { rho } => Some(rho),
            _ => None,
        }
    }
}

/// A model file. Exactly one of `kernel` (shared) and `kernels` (one per
/// group) is required for model commands; population shares come from
/// `alpha`, else from `sizes`, else `groups` equal shares.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub mu: Option<MeasureConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernels: Option<Vec<KernelConfig>>,
    /// Local bias for the sign analysis when no additive kernel is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<MeasureConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<usize>,
}

fn missing(field: &str, message: &str) -> CbmError {
    CbmError::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CbmError::Config {
            field: "config".into(),
            message: e.to_string(),
        })
    }

    pub fn mu(&self) -> Result<Measure> {
        self.mu
            .as_ref()
            .ok_or_else(|| missing("mu", "required"))?
            .build("mu")
    }

    /// `rho`, or the local measure of the shared kernel.
    pub fn rho(&self) -> Result<Measure> {
        if let Some(r) = &self.rho {
            return r.build("rho");
        }
        match self.kernel.as_ref().and_then(KernelConfig::rho) {
            Some(r) => r.build("kernel.rho"),
            None => Err(missing("rho", "required (or a kernel with a rho)")),
        }
    }

    pub fn alpha(&self) -> Result<Vec<f64>> {
        if let Some(a) = &self.alpha {
            return Ok(a.clone());
        }
        if let Some(s) = &self.sizes {
            let total: u64 = s.iter().sum();
            if total == 0 {
                return Err(missing("sizes", "group sizes must be positive"));
            }
            return Ok(s.iter().map(|&n| n as f64 / total as f64).collect());
        }
        if let Some(m) = self.groups {
            if m == 0 {
                return Err(missing("groups", "at least one group is required"));
            }
            return Ok(vec![1.0 / m as f64; m]);
        }
        Err(missing(
            "alpha",
            "one of alpha, sizes or groups is required",
        ))
    }

    pub fn kernels(&self) -> Result<Vec<BiasKernel>> {
        match (&self.kernel, &self.kernels) {
            (Some(k), None) => Ok(vec![k.build("kernel")?]),
            (None, Some(ks)) => ks
                .iter()
                .enumerate()
                .map(|(i, k)| k.build(&format!("kernels[{i}]")))
                .collect(),
            (Some(_), Some(_)) => Err(missing(
                "kernels",
                "give either kernel or kernels, not both",
            )),
            (None, None) => Err(missing("kernel", "required")),
        }
    }

    pub fn spec(&self) -> Result<CbmSpec> {
        let alpha = self.alpha()?;
        let spec = CbmSpec::new(self.mu()?, self.kernels()?, alpha);
        spec.map_err(|e| match e {
            CbmError::InvalidModel(m) if m.contains("shares") || m.contains("group") => {
                CbmError::Config {
                    field: "alpha".into(),
                    message: m,
                }
            }
            CbmError::InvalidModel(m) if m.contains("kernel") => CbmError::Config {
                field: "kernels".into(),
                message: m,
            },
            CbmError::InvalidModel(m) => CbmError::Config {
                field: "mu".into(),
                message: m,
            },
            CbmError::InvalidKernel(m) => CbmError::Config {
                field: "kernel".into(),
                message: m,
            },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_builds() {
        let cfg = ModelConfig::from_json(
            r#"{"mu": {"type": "uniform", "lo": -0.2, "hi": 0.2},
                "kernel": {"type": "additive", "rho": {"type": "uniform", "lo": -0.4, "hi": 0.4}},
                "alpha": [0.4, 0.3, 0.2, 0.1]}"#,
        )
        .unwrap();
        let spec = cfg.spec().unwrap();
        assert_eq!(spec.groups(), 4);
        assert_eq!(cfg.rho().unwrap(), Measure::uniform(-0.4, 0.4).unwrap());
    }

    #[test]
    fn errors_name_the_field() {
        let cfg = ModelConfig::from_json(
            r#"{"mu": {"type": "uniform", "lo": 0.3, "hi": 0.2},
                "kernel": {"type": "constant", "rho": {"type": "point", "at": 0.1}}, "groups": 2}"#,
        )
        .unwrap();
        match cfg.spec() {
            Err(CbmError::Config { field, .. }) => assert_eq!(field, "mu"),
            other => panic!("{other:?}"),
        }
        let cfg = ModelConfig::from_json(
            r#"{"mu": {"type": "point", "at": 0.0},
                "kernel": {"type": "additive", "rho": {"type": "discrete", "atoms": [[0.1, 0.5], [0.2, 0.5]]}},
                "groups": 2}"#,
        )
        .unwrap();
        match cfg.spec() {
            Err(CbmError::Config { field, .. }) => assert_eq!(field, "kernel"),
            other => panic!("{other:?}"),
        }
        let cfg = ModelConfig::from_json(
            r#"{"mu": {"type": "point", "at": 0.0},
                "kernel": {"type": "constant", "rho": {"type": "uniform", "lo": -0.1, "hi": 0.1}},
                "alpha": [0.5, 0.6]}"#,
        )
        .unwrap();
        match cfg.spec() {
            Err(CbmError::Config { field, .. }) => assert_eq!(field, "alpha"),
            other => panic!("{other:?}"),
        }
        assert!(ModelConfig::from_json(r#"{"mu": {"type": "gauss"}}"#).is_err());
        assert!(ModelConfig::from_json(r#"{"muu": 1}"#).is_err());
    }

    #[test]
    fn nested_mixture_paths() {
        let cfg = ModelConfig::from_json(
            r#"{"mu": {"type": "mixture", "components": [
                    {"weight": 0.3, "measure": {"type": "point", "at": 0.0}},
                    {"weight": 0.7, "measure": {"type": "uniform", "lo": 0.5, "hi": -0.5}}]}}"#,
        )
        .unwrap();
        match cfg.mu() {
            Err(CbmError::Config { field, .. }) => assert_eq!(field, "mu.components[1].measure"),
            other => panic!("{other:?}"),
        }
    }
}
