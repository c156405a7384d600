use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use super::space::{initial_population, SearchSpace};
use super::stats::{block_ranks, friedman, sign_test};
use super::{Elite, Evaluator, LogRow, ALPHA, MAX_ELITES, MIN_RESULTS};
use crate::config::Configuration;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub id: usize,
    pub config: Configuration,
}

/// Scores already paid for, keyed by (config id, seed index).
#[derive(Clone, Debug, Default)]
pub struct ScoreCache {
    scores: HashMap<(usize, usize), f64>,
}

impl ScoreCache {
    pub fn get(&self, id: usize, block: usize) -> Option<f64> {
        self.scores.get(&(id, block)).copied()
    }

    pub fn insert(&mut self, id: usize, block: usize, score: f64) {
        self.scores.insert((id, block), score);
    }

    /// Every cached score of one configuration, in seed order.
    pub fn history(&self, id: usize) -> Vec<f64> {
        let mut v: Vec<(usize, f64)> =
            self.scores.iter().filter(|((c, _), _)| *c == id).map(|((_, b), s)| (*b, *s)).collect();
        v.sort_by_key(|x| x.0);
        v.into_iter().map(|x| x.1).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RaceSettings {
    pub min_results: usize,
    pub alpha: f64,
    /// The race stops once at most this many configurations remain.
    pub survivors: usize,
    /// Maximum number of new evaluator calls.
    pub budget: u64,
    /// Iteration number written to the run log.
    pub iteration: usize,
    /// Seed of block `k` is `seed_base + k`.
    pub seed_base: u64,
}

impl RaceSettings {
    pub fn new(budget: u64, seed_base: u64) -> Self {
        RaceSettings { min_results: MIN_RESULTS, alpha: ALPHA, survivors: MAX_ELITES, budget, iteration: 1, seed_base }
    }
}

#[derive(Clone, Debug)]
pub struct RaceResult {
    /// Surviving candidates with their per-block scores, best mean first.
    pub survivors: Vec<(Candidate, Vec<f64>)>,
    pub calls: u64,
    pub blocks: usize,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::INFINITY
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Indices (into `scores`) that the statistical test eliminates.
fn eliminated(scores: &[Vec<f64>], alpha: f64) -> Vec<usize> {
    let k = scores.len();
    let n = scores[0].len();
    let blocks: Vec<Vec<f64>> = (0..n).map(|b| scores.iter().map(|s| s[b]).collect()).collect();
    if k == 2 {
        let mut sums = [0.0; 2];
        for b in &blocks {
            let r = block_ranks(b);
            sums[0] += r[0];
            sums[1] += r[1];
        }
        let (best, worst) = if sums[0] <= sums[1] { (0, 1) } else { (1, 0) };
        return if sign_test(&scores[best], &scores[worst]) < alpha { vec![worst] } else { vec![] };
    }
    match friedman(&blocks, alpha) {
        Some(f) if f.p_value < alpha => {
            let best = f.rank_sums.iter().copied().fold(f64::INFINITY, f64::min);
            (0..k).filter(|&j| f.rank_sums[j] - best > f.critical_difference).collect()
        }
        _ => vec![],
    }
}

/// Races `configs` on a shared seed sequence, eliminating statistically inferior ones.
pub fn race(
    configs: Vec<Candidate>,
    evaluator: &dyn Evaluator,
    settings: &RaceSettings,
    cache: &mut ScoreCache,
    log: &mut Vec<LogRow>,
) -> Result<RaceResult> {
    if configs.len() < 2 {
        return Err(Error::InvalidArgument("a race needs at least two configurations".into()));
    }
    let mut alive: Vec<(Candidate, Vec<f64>)> = configs.into_iter().map(|c| (c, Vec::new())).collect();
    let mut calls = 0u64;
    let mut block = 0usize;
    loop {
        if block >= settings.min_results && alive.len() <= settings.survivors {
            break;
        }
        let missing: Vec<usize> = (0..alive.len()).filter(|&i| cache.get(alive[i].0.id, block).is_none()).collect();
        if missing.len() as u64 > settings.budget - calls {
            break;
        }
        let seed = settings.seed_base + block as u64;
        let fresh: Vec<f64> = missing
            .par_iter()
            .map(|&i| evaluator.evaluate(&alive[i].0.config, seed).unwrap_or(evaluator.worst_case()))
            .collect();
        for (&i, &score) in missing.iter().zip(&fresh) {
            cache.insert(alive[i].0.id, block, score);
            log.push(LogRow { iteration: settings.iteration, config_id: alive[i].0.id, seed, aoc: score });
        }
        calls += missing.len() as u64;
        for (cand, scores) in alive.iter_mut() {
            scores.push(cache.get(cand.id, block).expect("score just cached"));
        }
        block += 1;
        if block >= settings.min_results && alive.len() > 1 {
            let scores: Vec<Vec<f64>> = alive.iter().map(|a| a.1.clone()).collect();
            let out = eliminated(&scores, settings.alpha);
            let mut idx = 0;
            alive.retain(|_| {
                idx += 1;
                !out.contains(&(idx - 1))
            });
        }
    }
    alive.sort_by(|a, b| mean(&a.1).total_cmp(&mean(&b.1)).then(a.0.id.cmp(&b.0.id)));
    Ok(RaceResult { survivors: alive, calls, blocks: block })
}

/// Everything a tuner repetition produces.
#[derive(Clone, Debug)]
pub struct TuningResult {
    pub elites: Vec<Elite>,
    pub log: Vec<LogRow>,
    pub calls: u64,
    pub iterations: usize,
}

/// Number of racing iterations for a space.
pub fn iteration_count(space: &SearchSpace) -> usize {
    2 + (space.active_dims().max(1) as f64).log2().floor() as usize
}

/// Iterated racing: sample around elites, race, keep the best, repeat.
pub fn iterated_race<R: Rng + ?Sized>(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    total_budget: u64,
    rng: &mut R,
) -> Result<TuningResult> {
    if total_budget < 50 {
        return Err(Error::InvalidArgument(format!("tuner budget {total_budget} is below 50 runs")));
    }
    let n_iter = iteration_count(space);
    let seed_base = rng.random::<u32>() as u64;
    let mut registry: Vec<Configuration> = Vec::new();
    let register = |cfg: Configuration, registry: &mut Vec<Configuration>| -> Candidate {
        let id = registry.iter().position(|c| *c == cfg).unwrap_or_else(|| {
            registry.push(cfg.clone());
            registry.len() - 1
        });
        Candidate { id, config: cfg }
    };
    let mut cache = ScoreCache::default();
    let mut log = Vec::new();
    let mut calls = 0u64;
    let mut elites: Vec<Candidate> = Vec::new();
    let mut iterations = 0;

    for j in 1..=n_iter {
        let remaining = total_budget - calls;
        let share = if j == n_iter { remaining } else { remaining / (n_iter - j + 1) as u64 };
        let n_j = (share / MIN_RESULTS.max(j + 4) as u64) as usize;
        if n_j < 2 || n_j <= elites.len() && j > 1 {
            break;
        }
        let mut members = elites.clone();
        if j == 1 {
            for cfg in initial_population(space, n_j, rng)? {
                let c = register(cfg, &mut registry);
                if !members.iter().any(|m| m.id == c.id) {
                    members.push(c);
                }
            }
        } else {
            let keep = 0.5 + 0.4 * (j - 1) as f64 / (n_iter - 1) as f64;
            let ne = elites.len();
            let total_w = (ne * (ne + 1) / 2) as f64;
            while members.len() < n_j {
                let mut u = rng.random::<f64>() * total_w;
                let mut parent = ne - 1;
                for r in 0..ne {
                    let w = (ne - r) as f64;
                    if u < w {
                        parent = r;
                        break;
                    }
                    u -= w;
                }
                let mut fresh = None;
                for _ in 0..10 {
                    let cfg = space.sample_around(&elites[parent].config, keep, (j - 1) as u32, rng);
                    if !members.iter().any(|m| m.config == cfg) {
                        fresh = Some(cfg);
                        break;
                    }
                }
                match fresh {
                    Some(cfg) => {
                        let c = register(cfg, &mut registry);
                        members.push(c);
                    }
                    None => break,
                }
            }
        }
        if members.len() < 2 {
            break;
        }
        let settings = RaceSettings { iteration: j, ..RaceSettings::new(share, seed_base) };
        let result = race(members, evaluator, &settings, &mut cache, &mut log)?;
        calls += result.calls;
        iterations = j;
        elites = result.survivors.into_iter().take(MAX_ELITES).map(|s| s.0).collect();
    }

    let elites = elites
        .into_iter()
        .map(|c| Elite {
            config_id: c.id,
            tuner_aoc: mean(&cache.history(c.id)),
            config: c.config,
            verified_aoc: Vec::new(),
        })
        .collect();
    Ok(TuningResult { elites, log, calls, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::tuner::build_space;

    struct ById(Vec<f64>);
    impl Evaluator for ById {
        fn evaluate(&self, cfg: &Configuration, _seed: u64) -> Result<f64> {
            Ok(self.0[cfg.lambda.unwrap_or(2) - 2])
        }
        fn worst_case(&self) -> f64 {
            1e9
        }
    }

    fn cands(n: usize) -> Vec<Candidate> {
        (0..n)
            .map(|i| Candidate { id: i, config: Configuration { lambda: Some(i + 2), ..Default::default() } })
            .collect()
    }

    #[test]
    fn constant_gap_eliminates_at_first_test() {
        let settings = RaceSettings { survivors: 1, ..RaceSettings::new(100, 0) };
        let (mut cache, mut log) = (ScoreCache::default(), Vec::new());
        let r = race(cands(2), &ById(vec![10.0, 20.0]), &settings, &mut cache, &mut log).unwrap();
        assert_eq!(r.survivors.len(), 1);
        assert_eq!(r.survivors[0].0.id, 0);
        assert_eq!(r.blocks, 5);
        assert_eq!(r.calls, 10);
    }

    #[test]
    fn identical_configs_race_until_budget() {
        let settings = RaceSettings { survivors: 1, ..RaceSettings::new(41, 0) };
        let (mut cache, mut log) = (ScoreCache::default(), Vec::new());
        let r = race(cands(4), &ById(vec![5.0; 4]), &settings, &mut cache, &mut log).unwrap();
        assert_eq!(r.survivors.len(), 4);
        assert_eq!(r.calls, 40);
        assert_eq!(log.len(), 40);
    }

    #[test]
    fn cached_scores_are_free() {
        let settings = RaceSettings { survivors: 1, ..RaceSettings::new(10, 0) };
        let (mut cache, mut log) = (ScoreCache::default(), Vec::new());
        race(cands(2), &ById(vec![10.0, 20.0]), &settings, &mut cache, &mut log).unwrap();
        let r = race(cands(2), &ById(vec![10.0, 20.0]), &settings, &mut cache, &mut log).unwrap();
        assert_eq!(r.calls, 0);
        assert_eq!(r.survivors.len(), 1);
    }

    #[test]
    fn best_rank_sum_is_never_eliminated() {
        let scores = vec![vec![1.0, 2.0, 1.0, 3.0, 1.0], vec![2.0, 1.0, 3.0, 1.0, 2.0], vec![9.0; 5], vec![8.0; 5]];
        let out = eliminated(&scores, 0.05);
        assert!(!out.contains(&0));
        assert!(!out.contains(&1));
    }

    #[test]
    fn budget_is_respected() {
        let space = build_space(&[], 5).unwrap();
        let r = iterated_race(&space, &ById((0..200).map(|i| i as f64).collect()), 200, &mut stream(1, 0));
        // lambda is not part of the space, so every config scores the same here.
        let r = r.unwrap();
        assert!(r.calls <= 200);
        assert_eq!(r.log.len() as u64, r.calls);
        assert!(!r.elites.is_empty() && r.elites.len() <= MAX_ELITES);
        let default_runs = r.log.iter().filter(|l| l.iteration == 1 && l.config_id == 0).count();
        assert!(default_runs >= MIN_RESULTS);
    }
}
