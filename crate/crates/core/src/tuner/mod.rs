//! Iterated racing over module and hyperparameter configurations.

mod race;
mod space;
pub mod stats;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use race::{iterated_race, race, Candidate, RaceResult, RaceSettings, ScoreCache, TuningResult};
pub use space::{
    build_space, initial_population, CategoricalDim, ContinuousDim, SearchSpace, SpaceExtension,
    INITIAL_SD_FRACTION, SD_SHRINK,
};

use crate::benchmarks::{FunctionId, ProblemInstance};
use crate::cma::run;
use crate::config::Configuration;
use crate::error::Result;
use crate::metrics::run_aoc;

/// Default number of algorithm runs per tuner repetition.
pub const DEFAULT_TUNER_BUDGET: u64 = 1000;
/// Evaluation budget per algorithm run, per problem dimension.
pub const EVALS_PER_DIM: u64 = 10_000;
pub const VERIFICATION_RUNS: usize = 25;
pub const MAX_ELITES: usize = 5;
pub const MIN_RESULTS: usize = 5;
pub const ALPHA: f64 = 0.05;

/// Scores one configuration on one seed; lower is better.
pub trait Evaluator: Sync {
    fn evaluate(&self, cfg: &Configuration, seed: u64) -> Result<f64>;
    /// Score assigned when an evaluation fails.
    fn worst_case(&self) -> f64;
}

/// Runs the optimizer on one benchmark instance and scores it by AOC.
#[derive(Clone, Debug)]
pub struct ProblemEvaluator {
    pub fid: FunctionId,
    pub dim: usize,
    pub iid: u64,
    pub budget: u64,
}

impl ProblemEvaluator {
    pub fn new(fid: FunctionId, dim: usize, iid: u64) -> Self {
        ProblemEvaluator { fid, dim, iid, budget: EVALS_PER_DIM * dim as u64 }
    }
}

impl Evaluator for ProblemEvaluator {
    fn evaluate(&self, cfg: &Configuration, seed: u64) -> Result<f64> {
        let mut problem = ProblemInstance::new(self.fid, self.dim, self.iid)?;
        let out = run(cfg, &mut problem, self.budget, seed)?;
        Ok(run_aoc(&out.trace))
    }

    fn worst_case(&self) -> f64 {
        self.budget as f64
    }
}

/// A configuration that survived a tuner run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Elite {
    #[serde(skip)]
    pub config_id: usize,
    pub config: Configuration,
    /// Mean score over the tuner-phase runs.
    pub tuner_aoc: f64,
    #[serde(default)]
    pub verified_aoc: Vec<f64>,
}

impl Elite {
    pub fn verified_mean(&self) -> Option<f64> {
        (!self.verified_aoc.is_empty())
            .then(|| self.verified_aoc.iter().sum::<f64>() / self.verified_aoc.len() as f64)
    }
}

pub fn elites_to_json(elites: &[Elite]) -> String {
    serde_json::to_string_pretty(elites).expect("elites serialize")
}

pub fn elites_from_json(text: &str) -> Result<Vec<Elite>> {
    Ok(serde_json::from_str(text)?)
}

/// Re-runs every elite on the seeds `seed_base..seed_base + n_runs` and sorts by verified mean.
pub fn verify(elites: &[Elite], evaluator: &dyn Evaluator, n_runs: usize, seed_base: u64) -> Result<Vec<Elite>> {
    use rayon::prelude::*;
    if elites.is_empty() {
        return Err(crate::error::Error::InvalidArgument("no elites to verify".into()));
    }
    let jobs: Vec<(usize, u64)> =
        (0..elites.len()).flat_map(|e| (0..n_runs as u64).map(move |k| (e, seed_base + k))).collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(e, seed)| evaluator.evaluate(&elites[e].config, seed).unwrap_or(evaluator.worst_case()))
        .collect();
    let mut out: Vec<Elite> = elites
        .iter()
        .enumerate()
        .map(|(e, el)| Elite { verified_aoc: scores[e * n_runs..(e + 1) * n_runs].to_vec(), ..el.clone() })
        .collect();
    out.sort_by(|a, b| a.verified_mean().unwrap().total_cmp(&b.verified_mean().unwrap()));
    Ok(out)
}

/// One evaluator call made during tuning.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub iteration: usize,
    pub config_id: usize,
    pub seed: u64,
    pub aoc: f64,
}

pub const LOG_HEADER: &str = "iteration,config_id,seed,aoc";

pub fn write_log<W: Write>(rows: &[LogRow], mut out: W) -> Result<()> {
    writeln!(out, "{LOG_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.iteration, r.config_id, r.seed, r.aoc)?;
    }
    Ok(())
}

pub fn read_log(text: &str) -> Result<Vec<LogRow>> {
    use crate::error::Error;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(LOG_HEADER) {
        return Err(Error::Parse(format!("run log must start with `{LOG_HEADER}`")));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.trim().split(',').collect();
            let bad = || Error::Parse(format!("bad run-log row `{l}`"));
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(LogRow {
                iteration: f[0].parse().map_err(|_| bad())?,
                config_id: f[1].parse().map_err(|_| bad())?,
                seed: f[2].parse().map_err(|_| bad())?,
                aoc: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed;
    impl Evaluator for Fixed {
        fn evaluate(&self, cfg: &Configuration, seed: u64) -> Result<f64> {
            Ok(seed as f64 + if cfg.active { 100.0 } else { 0.0 })
        }
        fn worst_case(&self) -> f64 {
            1e9
        }
    }

    #[test]
    fn verify_shares_seeds_and_ranks() {
        let a = Elite { config_id: 0, config: Configuration::default(), tuner_aoc: 1.0, verified_aoc: vec![] };
        let b = Elite { config: Configuration { active: true, ..Default::default() }, ..a.clone() };
        let v = verify(&[b, a.clone(), a], &Fixed, 25, 10).unwrap();
        assert!(v.iter().all(|e| e.verified_aoc.len() == 25));
        assert_eq!(v[0].verified_aoc, v[1].verified_aoc);
        assert_eq!(v[0].verified_aoc[0], 10.0);
        assert!(v[2].config.active);
        assert!(verify(&[], &Fixed, 25, 0).is_err());
    }

    #[test]
    fn elites_json_has_contract_keys() {
        let e = Elite { config_id: 3, config: Configuration::default(), tuner_aoc: 12.5, verified_aoc: vec![1.0, 2.0] };
        let v: serde_json::Value = serde_json::from_str(&elites_to_json(std::slice::from_ref(&e))).unwrap();
        let keys: Vec<&String> = v[0].as_object().unwrap().keys().collect();
        assert_eq!(keys, vec!["config", "tuner_aoc", "verified_aoc"]);
        let back = elites_from_json(&elites_to_json(std::slice::from_ref(&e))).unwrap();
        assert_eq!(back[0].config, e.config);
        assert_eq!(back[0].verified_aoc, e.verified_aoc);
    }

    #[test]
    fn log_round_trip() {
        let rows = vec![
            LogRow { iteration: 1, config_id: 0, seed: 42, aoc: 1234.5 },
            LogRow { iteration: 2, config_id: 7, seed: 43, aoc: 0.125 },
        ];
        let mut buf = Vec::new();
        write_log(&rows, &mut buf).unwrap();
        assert_eq!(read_log(std::str::from_utf8(&buf).unwrap()).unwrap(), rows);
    }
}
