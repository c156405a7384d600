//! The module and hyperparameter space explored by the tuner.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{module_options, Configuration, HYPERPARAMETERS, MODULES};
use crate::error::{Error, Result};
use crate::params::StrategyParameters;

/// Standard deviation of the first sampling round, as a fraction of the range.
pub const INITIAL_SD_FRACTION: f64 = 0.25;
/// Per-iteration shrink factor of the continuous sampling deviation.
pub const SD_SHRINK: f64 = 0.6;
const TRUNCATION_TRIES: usize = 100;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceExtension {
    #[default]
    None,
    SsaNew,
    BoundaryNew,
}

impl FromStr for SpaceExtension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "baseline" => Ok(SpaceExtension::None),
            "ssa_new" => Ok(SpaceExtension::SsaNew),
            "boundary_new" => Ok(SpaceExtension::BoundaryNew),
            other => Err(Error::InvalidArgument(format!("unknown space extension {other:?}"))),
        }
    }
}

impl fmt::Display for SpaceExtension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceExtension::None => "none",
            SpaceExtension::SsaNew => "ssa_new",
            SpaceExtension::BoundaryNew => "boundary_new",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalDim {
    pub name: String,
    pub options: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousDim {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    /// The lower bound itself is not admissible.
    pub lower_open: bool,
}

impl ContinuousDim {
    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        v <= self.upper && if self.lower_open { v > self.lower } else { v >= self.lower }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace {
    pub categorical: Vec<CategoricalDim>,
    pub continuous: Vec<ContinuousDim>,
    /// Problem dimension, used to resolve default learning rates.
    pub dim: usize,
}

const BASELINE_OPTIONS: [(&str, &[&str]); 2] =
    [("ssa", &["csa", "tpa"]), ("weights", &["default", "half_power_lambda"])];

/// Builds the tuning space for one experiment. At most one extension may be given.
pub fn build_space(extensions: &[SpaceExtension], dim: usize) -> Result<SearchSpace> {
    let active: Vec<SpaceExtension> =
        extensions.iter().copied().filter(|e| *e != SpaceExtension::None).collect();
    if active.len() > 1 {
        return Err(Error::InvalidArgument("space extensions are mutually exclusive".into()));
    }
    let ext = active.first().copied().unwrap_or(SpaceExtension::None);
    let categorical = MODULES
        .iter()
        .map(|&m| {
            let all = module_options(m).expect("known module");
            let options: Vec<&str> = match (m, ext) {
                ("ssa", SpaceExtension::SsaNew) => all.to_vec(),
                ("bound_correction", SpaceExtension::BoundaryNew) => all.to_vec(),
                ("bound_correction", _) => vec!["none"],
                _ => BASELINE_OPTIONS
                    .iter()
                    .find(|(name, _)| *name == m)
                    .map_or_else(|| all.to_vec(), |(_, opts)| opts.to_vec()),
            };
            CategoricalDim { name: m.to_string(), options: options.into_iter().map(String::from).collect() }
        })
        .collect();
    let cont = |name: &str, lower_open| ContinuousDim { name: name.into(), lower: 0.0, upper: 1.0, lower_open };
    SearchSpace::new(
        categorical,
        vec![cont("c1", false), cont("c_mu", false), cont("c_c", true), cont("c_sigma", true)],
        dim,
    )
}

impl SearchSpace {
    pub fn new(categorical: Vec<CategoricalDim>, continuous: Vec<ContinuousDim>, dim: usize) -> Result<Self> {
        for c in &categorical {
            let allowed = module_options(&c.name)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown module {:?}", c.name)))?;
            if c.options.is_empty() || c.options.iter().any(|o| !allowed.contains(&o.as_str())) {
                return Err(Error::InvalidArgument(format!("bad options for module {:?}", c.name)));
            }
        }
        for c in &continuous {
            if !HYPERPARAMETERS.contains(&c.name.as_str()) {
                return Err(Error::InvalidArgument(format!("unknown hyperparameter {:?}", c.name)));
            }
            if !(c.lower < c.upper) {
                return Err(Error::InvalidArgument(format!("empty range for {:?}", c.name)));
            }
        }
        Ok(SearchSpace { categorical, continuous, dim })
    }

    /// Dimensions that can actually vary.
    pub fn active_dims(&self) -> usize {
        self.categorical.iter().filter(|c| c.options.len() > 1).count() + self.continuous.len()
    }

    /// Effective value of a hyperparameter, resolving unset ones to the defaults.
    pub fn value(&self, cfg: &Configuration, name: &str) -> f64 {
        if let Some(v) = cfg.continuous(name) {
            return v;
        }
        let p = StrategyParameters::new(self.dim, cfg).expect("valid configuration");
        match name {
            "c1" => p.c1,
            "c_mu" => p.c_mu,
            "c_c" => p.c_c,
            "c_sigma" => p.c_sigma,
            _ => f64::NAN,
        }
    }

    pub fn contains(&self, cfg: &Configuration) -> bool {
        self.categorical.iter().all(|c| cfg.option(&c.name).is_some_and(|o| c.options.contains(&o)))
            && self.continuous.iter().all(|c| cfg.continuous(&c.name).is_none_or(|v| c.contains(v)))
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let mut cfg = Configuration::default();
        for c in &self.categorical {
            let o = &c.options[rng.random_range(0..c.options.len())];
            cfg.set_option(&c.name, o).expect("validated option");
        }
        for c in &self.continuous {
            let v = loop {
                let u: f64 = rng.random();
                let v = if c.lower_open { c.upper - u * c.range() } else { c.lower + u * c.range() };
                if c.contains(v) {
                    break v;
                }
            };
            cfg.set_continuous(&c.name, v).expect("known hyperparameter");
        }
        cfg
    }

    /// Samples a configuration around `parent`.
    ///
    /// Categorical values are inherited with probability `keep`, otherwise drawn
    /// uniformly. Continuous values follow a normal around the parent's value,
    /// truncated to the box, with deviation `INITIAL_SD_FRACTION·range·SD_SHRINK^round`.
    pub fn sample_around<R: Rng + ?Sized>(
        &self,
        parent: &Configuration,
        keep: f64,
        round: u32,
        rng: &mut R,
    ) -> Configuration {
        let mut cfg = parent.clone();
        for c in &self.categorical {
            if rng.random::<f64>() >= keep {
                let o = &c.options[rng.random_range(0..c.options.len())];
                cfg.set_option(&c.name, o).expect("validated option");
            }
        }
        for c in &self.continuous {
            let center = self.value(parent, &c.name).clamp(c.lower, c.upper);
            let sd = INITIAL_SD_FRACTION * c.range() * SD_SHRINK.powi(round as i32);
            let mut v = None;
            for _ in 0..TRUNCATION_TRIES {
                let n: f64 = rng.sample(StandardNormal);
                let cand = center + sd * n;
                if c.contains(cand) {
                    v = Some(cand);
                    break;
                }
            }
            let v = v.unwrap_or(if c.contains(center) { center } else { c.upper });
            cfg.set_continuous(&c.name, v).expect("known hyperparameter");
        }
        cfg
    }
}

/// `n - 1` uniform random configurations followed by the default configuration.
pub fn initial_population<R: Rng + ?Sized>(space: &SearchSpace, n: usize, rng: &mut R) -> Result<Vec<Configuration>> {
    if n < 2 {
        return Err(Error::InvalidArgument("an initial population needs at least two members".into()));
    }
    let mut pop = vec![Configuration::default()];
    pop.extend((1..n).map(|_| space.sample_uniform(rng)));
    Ok(pop)
}
