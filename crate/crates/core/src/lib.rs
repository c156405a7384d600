//! Modular CMA-ES laboratory.
//!
//! A configurable CMA-ES whose eleven module dimensions (active update, elitism,
//! orthogonal/mirrored/quasi-random sampling, sequential selection, threshold
//! convergence, seven step-size rules, recombination weights, restarts and six
//! boundary corrections) can be combined freely, together with the anytime
//! area-over-the-ECDF metric and an iterated-racing tuner used to assess how a
//! new module option interacts with the existing ones.

pub mod benchmarks;
pub mod boundary;
pub mod cma;
pub mod config;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod params;
pub mod report;
pub mod restart;
pub mod rng;
pub mod sampling;
pub mod stepsize;
pub mod tuner;

pub use benchmarks::{FunctionId, ProblemInstance};
pub use boundary::{BoundCorrection, SearchBox};
pub use cma::{run, CmaState, Individual, Objective, RunOutcome};
pub use config::{BaseSampler, Configuration, Mirrored, RestartStrategy, SsaMethod, WeightsOption};
pub use error::{Error, Result};
pub use metrics::{AocScore, RunTrace, TargetSet};
pub use params::StrategyParameters;
pub use tuner::{Elite, SearchSpace, SpaceExtension};
