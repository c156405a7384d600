//! One point of the module × hyperparameter space.
//!
//! Serialized as a flat JSON object whose keys are the field names below,
//! categorical options as lowercase strings and learning rates as numbers.
//! Unknown keys are rejected; absent learning rates fall back to the
//! tutorial defaults.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SsaMethod {
    #[default]
    #[serde(rename = "csa")]
    Csa,
    #[serde(rename = "tpa")]
    Tpa,
    #[serde(rename = "msr")]
    Msr,
    #[serde(rename = "psr")]
    Psr,
    #[serde(rename = "xnes")]
    Xnes,
    #[serde(rename = "m-xnes")]
    MXnes,
    #[serde(rename = "p-xnes")]
    PXnes,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mirrored {
    #[default]
    Off,
    Mirrored,
    MirroredPairwise,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseSampler {
    #[default]
    Gaussian,
    Sobol,
    Halton,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightsOption {
    #[default]
    Default,
    Equal,
    HalfPowerLambda,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartStrategy {
    #[default]
    Off,
    Ipop,
    Bipop,
}

pub use crate::boundary::BoundCorrection;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Configuration {
    #[serde(default)]
    pub active: bool,
    #[serde(default)]
    pub elitist: bool,
    #[serde(default)]
    pub orthogonal: bool,
    #[serde(default)]
    pub sequential: bool,
    #[serde(default)]
    pub threshold_convergence: bool,
    #[serde(default)]
    pub ssa: SsaMethod,
    #[serde(default)]
    pub mirrored: Mirrored,
    #[serde(default)]
    pub base_sampler: BaseSampler,
    #[serde(default)]
    pub weights: WeightsOption,
    #[serde(default)]
    pub restart: RestartStrategy,
    #[serde(default)]
    pub bound_correction: BoundCorrection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<usize>,
}

/// The eleven categorical module names, in table order.
pub const MODULES: [&str; 11] = [
    "active",
    "elitist",
    "orthogonal",
    "sequential",
    "threshold_convergence",
    "ssa",
    "mirrored",
    "base_sampler",
    "weights",
    "restart",
    "bound_correction",
];

/// Tunable learning-rate hyperparameters.
pub const HYPERPARAMETERS: [&str; 4] = ["c1", "c_mu", "c_c", "c_sigma"];

/// Every option of every module, in table order (default first).
pub fn module_options(module: &str) -> Option<&'static [&'static str]> {
    Some(match module {
        "active" | "elitist" | "orthogonal" | "sequential" | "threshold_convergence" => {
            &["false", "true"]
        }
        "ssa" => &["csa", "tpa", "msr", "psr", "xnes", "m-xnes", "p-xnes"],
        "mirrored" => &["off", "mirrored", "mirrored_pairwise"],
        "base_sampler" => &["gaussian", "sobol", "halton"],
        "weights" => &["default", "equal", "half_power_lambda"],
        "restart" => &["off", "ipop", "bipop"],
        "bound_correction" => &["none", "ur", "mcs", "cotn", "scs", "tcs"],
        _ => return None,
    })
}

fn enum_str<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => unreachable!("categorical option serialized as {other:?}"),
    }
}

fn parse_enum<T: for<'de> Deserialize<'de>>(module: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_owned()))
        .map_err(|_| Error::InvalidConfig(format!("`{value}` is not an option of `{module}`")))
}

fn parse_flag(module: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("`{value}` is not an option of `{module}`"))),
    }
}

impl Configuration {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Configuration =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: Option<f64>, open_low: bool| -> Result<()> {
            if let Some(v) = v {
                let ok = v.is_finite() && v <= 1.0 && if open_low { v > 0.0 } else { v >= 0.0 };
                if !ok {
                    let range = if open_low { "(0, 1]" } else { "[0, 1]" };
                    return Err(Error::InvalidConfig(format!("{name} = {v} outside {range}")));
                }
            }
            Ok(())
        };
        unit("c1", self.c1, false)?;
        unit("c_mu", self.c_mu, false)?;
        unit("c_c", self.c_c, true)?;
        unit("c_sigma", self.c_sigma, true)?;
        if let Some(l) = self.lambda {
            if l < 2 {
                return Err(Error::InvalidConfig(format!("lambda = {l} must be at least 2")));
            }
        }
        Ok(())
    }

    /// The option string currently selected for `module`.
    pub fn option(&self, module: &str) -> Option<String> {
        Some(match module {
            "active" => self.active.to_string(),
            "elitist" => self.elitist.to_string(),
            "orthogonal" => self.orthogonal.to_string(),
            "sequential" => self.sequential.to_string(),
            "threshold_convergence" => self.threshold_convergence.to_string(),
            "ssa" => enum_str(&self.ssa),
            "mirrored" => enum_str(&self.mirrored),
            "base_sampler" => enum_str(&self.base_sampler),
            "weights" => enum_str(&self.weights),
            "restart" => enum_str(&self.restart),
            "bound_correction" => enum_str(&self.bound_correction),
            _ => return None,
        })
    }

    pub fn set_option(&mut self, module: &str, value: &str) -> Result<()> {
        match module {
            "active" => self.active = parse_flag(module, value)?,
            "elitist" => self.elitist = parse_flag(module, value)?,
            "orthogonal" => self.orthogonal = parse_flag(module, value)?,
            "sequential" => self.sequential = parse_flag(module, value)?,
            "threshold_convergence" => self.threshold_convergence = parse_flag(module, value)?,
            "ssa" => self.ssa = parse_enum(module, value)?,
            "mirrored" => self.mirrored = parse_enum(module, value)?,
            "base_sampler" => self.base_sampler = parse_enum(module, value)?,
            "weights" => self.weights = parse_enum(module, value)?,
            "restart" => self.restart = parse_enum(module, value)?,
            "bound_correction" => self.bound_correction = parse_enum(module, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown module `{module}`"))),
        }
        Ok(())
    }

    pub fn continuous(&self, name: &str) -> Option<f64> {
        match name {
            "c1" => self.c1,
            "c_mu" => self.c_mu,
            "c_c" => self.c_c,
            "c_sigma" => self.c_sigma,
            _ => None,
        }
    }

    pub fn set_continuous(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "c1" => self.c1 = Some(value),
            "c_mu" => self.c_mu = Some(value),
            "c_c" => self.c_c = Some(value),
            "c_sigma" => self.c_sigma = Some(value),
            _ => return Err(Error::InvalidConfig(format!("unknown hyperparameter `{name}`"))),
        }
        Ok(())
    }

    /// Compact `module=option` listing of the non-default modules.
    pub fn label(&self) -> String {
        let default = Configuration::default();
        let parts: Vec<String> = MODULES
            .iter()
            .filter(|m| self.option(m) != default.option(m))
            .map(|m| format!("{m}={}", self.option(m).unwrap_or_default()))
            .collect();
        if parts.is_empty() {
            "default".to_owned()
        } else {
            parts.join(",")
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_json_is_flat_and_lowercase() {
        let json = Configuration::default().to_json();
        assert_eq!(
            json,
            r#"{"active":false,"elitist":false,"orthogonal":false,"sequential":false,"threshold_convergence":false,"ssa":"csa","mirrored":"off","base_sampler":"gaussian","weights":"default","restart":"off","bound_correction":"none"}"#
        );
    }

    #[test]
    fn unknown_keys_and_options_rejected() {
        assert!(Configuration::from_json(r#"{"foo": 1}"#).is_err());
        assert!(Configuration::from_json(r#"{"ssa": "CSA"}"#).is_err());
        assert!(Configuration::from_json(r#"{"c1": 1.5}"#).is_err());
        assert!(Configuration::from_json(r#"{"c_sigma": 0.0}"#).is_err());
        assert!(Configuration::from_json("{not json").is_err());
    }

    #[test]
    fn partial_objects_fill_defaults() {
        let cfg = Configuration::from_json(r#"{"ssa":"m-xnes","c1":0.1}"#).unwrap();
        assert_eq!(cfg.ssa, SsaMethod::MXnes);
        assert_eq!(cfg.c1, Some(0.1));
        assert!(!cfg.elitist);
    }

    #[test]
    fn option_accessors_cover_every_module() {
        let mut cfg = Configuration::default();
        for m in MODULES {
            for opt in module_options(m).unwrap() {
                cfg.set_option(m, opt).unwrap();
                assert_eq!(cfg.option(m).as_deref(), Some(*opt));
            }
        }
        assert!(cfg.set_option("ssa", "cma").is_err());
    }

    fn arb_config() -> impl Strategy<Value = Configuration> {
        let cats = MODULES
            .iter()
            .map(|m| (0..module_options(m).unwrap().len()).boxed())
            .collect::<Vec<_>>();
        (cats, prop::option::of(0.0..=1.0f64), prop::option::of(0.01..=1.0f64)).prop_map(
            |(idx, c1, cs)| {
                let mut cfg = Configuration::default();
                for (m, i) in MODULES.iter().zip(idx) {
                    cfg.set_option(m, module_options(m).unwrap()[i]).unwrap();
                }
                cfg.c1 = c1;
                cfg.c_sigma = cs;
                cfg
            },
        )
    }

    proptest! {
        #[test]
        fn json_round_trip(cfg in arb_config()) {
            prop_assert_eq!(Configuration::from_json(&cfg.to_json()).unwrap(), cfg);
        }
    }
}
