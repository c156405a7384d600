//! The configurable CMA-ES generation loop.
//!
//! One generation is `generate_population` → `evaluate_and_select` →
//! (TPA probes) → `update_distribution`. `run` wraps the loop with budget
//! accounting, trace logging and the restart schedule.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::boundary::{correct, SearchBox};
use crate::config::{Configuration, Mirrored, SsaMethod};
use crate::error::{Error, Result};
use crate::linalg::{compose, jacobi_eigen, symmetrize};
use crate::metrics::RunTrace;
use crate::params::{mu_eff_of, StrategyParameters};
use crate::restart::{
    next_restart_config, should_restart, RestartLedger, StagnationView, StopReason, Triggers,
};
use crate::rng::{stream, streams, RunRng};
use crate::sampling::{Sampler, SamplerSpec};
use crate::stepsize::{self, SsaInput, SsaState};

/// Runs stop once the best precision reaches this value.
pub const FINAL_TARGET: f64 = 1e-8;
/// Initial step size as a fraction of the mean box width.
pub const SIGMA0_FRACTION: f64 = 0.2;
/// Threshold convergence: initial length as a fraction of the box diagonal.
pub const THRESHOLD_INITIAL: f64 = 0.2;
/// Threshold convergence: decay exponent of the remaining-budget fraction.
pub const THRESHOLD_DECAY: f64 = 1.0;
/// Eigenvalues are clamped below at this value before taking square roots.
pub const EIGEN_FLOOR: f64 = 1e-30;

pub trait Objective {
    fn dim(&self) -> usize;
    fn evaluate(&mut self, x: &[f64]) -> f64;
    fn search_box(&self) -> SearchBox;
    /// Known optimum value, used to report precision `f - f_opt`.
    fn optimum(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub z: DVector<f64>,
    /// Step in σ units: `x_raw = m + σ·y`.
    pub y: DVector<f64>,
    /// Candidate after boundary correction.
    pub x: DVector<f64>,
    /// `NaN` until evaluated; non-finite values are stored as `+∞`.
    pub f: f64,
    pub pair_id: Option<usize>,
    pub trial_sigma: Option<f64>,
}

impl Individual {
    pub fn is_evaluated(&self) -> bool {
        !self.f.is_nan()
    }
}

#[derive(Clone, Debug)]
pub struct CmaState {
    pub m: DVector<f64>,
    pub c: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Square roots of the eigenvalues of `c`, aligned with the columns of `b`.
    pub d: DVector<f64>,
    pub inv_sqrt_c: DMatrix<f64>,
    pub condition_number: f64,
    pub sigma: f64,
    pub sigma0: f64,
    pub p_sigma: DVector<f64>,
    pub p_c: DVector<f64>,
    /// Generations completed in this restart.
    pub t: usize,
    /// Objective calls of the whole run.
    pub evals: u64,
    pub best: Option<(DVector<f64>, f64)>,
    /// Every f evaluated in the previous generation.
    pub prev_f: Option<Vec<f64>>,
    /// Parents of the previous generation, for elitist selection.
    pub prev_parents: Vec<Individual>,
    pub ssa: SsaState,
    /// Value of `t·(c1 + c_mu)·d` when B and D were last recomputed.
    pub last_eig_update: f64,
    /// Best f after each generation of this restart.
    pub best_history: Vec<f64>,
    pub sigma_out_of_range: bool,
}

impl CmaState {
    pub fn new(mean: DVector<f64>, sigma0: f64) -> Self {
        let n = mean.len();
        CmaState {
            c: DMatrix::identity(n, n),
            b: DMatrix::identity(n, n),
            d: DVector::from_element(n, 1.0),
            inv_sqrt_c: DMatrix::identity(n, n),
            condition_number: 1.0,
            sigma: sigma0,
            sigma0,
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            t: 0,
            evals: 0,
            best: None,
            prev_f: None,
            prev_parents: Vec::new(),
            ssa: SsaState::default(),
            last_eig_update: 0.0,
            best_history: Vec::new(),
            sigma_out_of_range: false,
            m: mean,
        }
    }

    fn note_best(&mut self, x: &DVector<f64>, f: f64) {
        if self.best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            self.best = Some((x.clone(), f));
        }
    }

    /// Recomputes B, D and C^{-1/2}. Returns false if C had a non-positive eigenvalue.
    pub fn refresh_eigen(&mut self) -> Result<bool> {
        let eig = jacobi_eigen(&self.c)?;
        let positive = eig.values.iter().all(|&v| v > 0.0);
        let clamped = eig.values.map(|v| v.max(EIGEN_FLOOR));
        if !positive {
            self.c = compose(&eig.vectors, &clamped);
        }
        self.d = clamped.map(f64::sqrt);
        self.inv_sqrt_c = compose(&eig.vectors, &self.d.map(|v| 1.0 / v));
        self.condition_number = clamped.max() / clamped.min();
        self.b = eig.vectors;
        Ok(positive)
    }
}

/// Length below which threshold convergence stretches a step.
pub fn threshold_length(bounds: &SearchBox, evals: u64, budget_total: u64) -> f64 {
    let remaining = budget_total.saturating_sub(evals) as f64 / budget_total.max(1) as f64;
    THRESHOLD_INITIAL * bounds.diagonal() * remaining.powf(THRESHOLD_DECAY)
}

/// Random streams and fixed context used while generating candidates.
pub struct GenerationContext<'a> {
    pub sampler: &'a mut Sampler,
    pub bounds: &'a SearchBox,
    pub boundary_rng: &'a mut RunRng,
    pub step_rng: &'a mut RunRng,
    pub budget_total: u64,
}

pub fn generate_population(
    state: &CmaState,
    params: &StrategyParameters,
    cfg: &Configuration,
    ctx: &mut GenerationContext<'_>,
) -> Result<Vec<Individual>> {
    let base = ctx.sampler.sample(params.lambda)?;
    let threshold = cfg
        .threshold_convergence
        .then(|| threshold_length(ctx.bounds, state.evals, ctx.budget_total));
    let tau = stepsize::p_xnes_tau(params.d);
    let mut pair_sigma: Vec<(usize, f64)> = Vec::new();
    let mut pop = Vec::with_capacity(base.len());
    for bs in base {
        let trial_sigma = if cfg.ssa == SsaMethod::PXnes {
            let shared = bs.pair_id.and_then(|id| pair_sigma.iter().find(|p| p.0 == id).map(|p| p.1));
            let s = shared.unwrap_or_else(|| {
                let n: f64 = ctx.step_rng.sample(StandardNormal);
                state.sigma * (tau * n).exp()
            });
            if let Some(id) = bs.pair_id {
                pair_sigma.push((id, s));
            }
            Some(s)
        } else {
            None
        };
        let scale = trial_sigma.unwrap_or(state.sigma);
        let mut step = &state.b * bs.z.component_mul(&state.d) * scale;
        if let Some(l) = threshold {
            let len = step.norm();
            if len > 0.0 && len < l {
                step *= l / len;
            }
        }
        let x_raw = &state.m + &step;
        let x = correct(&x_raw, ctx.bounds, cfg.bound_correction, ctx.boundary_rng);
        pop.push(Individual {
            y: step / state.sigma,
            z: bs.z,
            x,
            f: f64::NAN,
            pair_id: bs.pair_id,
            trial_sigma,
        });
    }
    Ok(pop)
}

/// Result of evaluating one population.
#[derive(Clone, Debug)]
pub struct Selection {
    /// Finite-valued selection pool, best first. Parents are its head.
    pub ranked: Vec<Individual>,
    pub n_parents: usize,
    /// Every candidate evaluated this generation, in evaluation order.
    pub evaluated: Vec<Individual>,
    pub evals_used: u64,
    /// The budget ran out before the population was fully evaluated.
    pub truncated: bool,
}

impl Selection {
    pub fn parents(&self) -> &[Individual] {
        &self.ranked[..self.n_parents]
    }
}

/// Evaluates candidates in order and ranks the eligible pool.
///
/// `eval` returns `None` once the budget is exhausted.
pub fn evaluate_and_select(
    pop: Vec<Individual>,
    state: &CmaState,
    params: &StrategyParameters,
    cfg: &Configuration,
    eval: &mut dyn FnMut(&DVector<f64>) -> Option<f64>,
) -> Selection {
    let prev_best = state
        .prev_f
        .as_ref()
        .and_then(|fs| fs.iter().copied().filter(|f| f.is_finite()).min_by(f64::total_cmp));
    let mut evaluated = Vec::with_capacity(pop.len());
    let mut truncated = false;
    for mut ind in pop {
        let Some(f) = eval(&ind.x) else {
            truncated = true;
            break;
        };
        ind.f = if f.is_finite() { f } else { f64::INFINITY };
        let improved = prev_best.is_some_and(|pb| ind.f < pb);
        evaluated.push(ind);
        if cfg.sequential && improved && evaluated.len() >= params.mu {
            break;
        }
    }
    let evals_used = evaluated.len() as u64;

    let mut pool: Vec<Individual> = if cfg.mirrored == Mirrored::MirroredPairwise {
        let mut best_of_pair: Vec<Individual> = Vec::new();
        for ind in &evaluated {
            match ind.pair_id.and_then(|id| best_of_pair.iter().position(|b| b.pair_id == Some(id))) {
                Some(i) if ind.f < best_of_pair[i].f => best_of_pair[i] = ind.clone(),
                Some(_) => {}
                None => best_of_pair.push(ind.clone()),
            }
        }
        best_of_pair
    } else {
        evaluated.clone()
    };
    if cfg.elitist {
        pool.extend(state.prev_parents.iter().cloned());
    }
    pool.retain(|i| i.f.is_finite());
    pool.sort_by(|a, b| a.f.total_cmp(&b.f));
    let n_parents = params.mu.min(pool.len());
    Selection { ranked: pool, n_parents, evaluated, evals_used, truncated }
}

/// Positive weights for `n` parents, renormalized when fewer than μ are available.
fn parent_weights(params: &StrategyParameters, n: usize) -> Vec<f64> {
    let mut w = params.positive_weights()[..n].to_vec();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Weighted mean of the parents.
pub fn recombine(params: &StrategyParameters, parents: &[Individual]) -> DVector<f64> {
    let w = parent_weights(params, parents.len());
    let mut m = DVector::zeros(parents[0].x.len());
    for (wi, p) in w.iter().zip(parents) {
        m.axpy(*wi, &p.x, 1.0);
    }
    m
}

/// Forward and backward TPA probe points around the new mean.
pub fn tpa_probe_points(old_mean: &DVector<f64>, new_mean: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let shift = (new_mean - old_mean) * stepsize::TPA_ALPHA;
    (new_mean + &shift, new_mean - &shift)
}

/// Mean, evolution-path, covariance and step-size update.
///
/// Returns a stop reason when the covariance lost positive definiteness or σ
/// left its admissible range.
pub fn update_distribution(
    state: &mut CmaState,
    selection: &Selection,
    params: &StrategyParameters,
    cfg: &Configuration,
    tpa_probes: Option<(f64, f64)>,
) -> Result<Option<StopReason>> {
    let parents = selection.parents();
    if parents.is_empty() {
        return Err(Error::Numerical("no finite parent to recombine".into()));
    }
    let n = params.d as f64;
    let w = parent_weights(params, parents.len());
    let mu_eff = if parents.len() == params.mu { params.mu_eff } else { mu_eff_of(&w) };
    let sigma = state.sigma;
    let old_m = state.m.clone();

    let ys: Vec<DVector<f64>> = parents.iter().map(|p| (&p.x - &old_m) / sigma).collect();
    let mut y_w = DVector::zeros(params.d);
    for (wi, y) in w.iter().zip(&ys) {
        y_w.axpy(*wi, y, 1.0);
    }
    let new_m = &old_m + &y_w * sigma;

    let cs = params.c_sigma;
    state.p_sigma = &state.p_sigma * (1.0 - cs) + (&state.inv_sqrt_c * &y_w) * (cs * (2.0 - cs) * mu_eff).sqrt();

    let current_f: Vec<f64> = selection.evaluated.iter().map(|i| i.f).collect();
    let selected_z: Vec<&DVector<f64>> = parents.iter().map(|p| &p.z).collect();
    let selected_trial: Vec<Option<f64>> = parents.iter().map(|p| p.trial_sigma).collect();
    let input = SsaInput {
        current_f: &current_f,
        previous_f: state.prev_f.as_deref(),
        selected_z: &selected_z,
        selected_trial_sigma: &selected_trial,
        weights: &w,
        old_mean: &old_m,
        new_mean: &new_m,
        sigma,
        p_sigma: &state.p_sigma,
        eigenvectors: &state.b,
        eigen_sqrt: &state.d,
        mu_eff,
        chi_d: params.chi_d,
        c_sigma: cs,
        d_sigma: params.d_sigma,
        tpa_probes,
    };
    let outcome = stepsize::adapt(cfg.ssa, &input, &mut state.ssa);

    let generation = (state.t + 1) as i32;
    let ps_norm = state.p_sigma.norm() / (1.0 - (1.0 - cs).powi(2 * generation)).sqrt();
    let h_sigma = if ps_norm < (1.4 + 2.0 / (n + 1.0)) * params.chi_d { 1.0 } else { 0.0 };
    let cc = params.c_c;
    state.p_c = &state.p_c * (1.0 - cc) + &y_w * (h_sigma * (cc * (2.0 - cc) * mu_eff).sqrt());

    // Rank-μ contributions: positive parents plus, with active update, the worst of the pool.
    let mut rank_mu: Vec<(f64, DVector<f64>)> = w.iter().copied().zip(ys).collect();
    if cfg.active {
        let neg = params.negative_weights();
        let tail = &selection.ranked[selection.n_parents..];
        let k = neg.len().min(tail.len());
        for (wi, ind) in neg[neg.len() - k..].iter().zip(&tail[tail.len() - k..]) {
            let y = (&ind.x - &old_m) / sigma;
            let mahal = (&state.inv_sqrt_c * &y).norm_squared();
            let scaled = if mahal > 0.0 { wi * n / mahal } else { 0.0 };
            rank_mu.push((scaled, y));
        }
    }
    let weight_sum: f64 = w.iter().sum::<f64>()
        + if cfg.active {
            let k = params.negative_weights().len().min(selection.ranked.len() - selection.n_parents);
            params.negative_weights()[params.negative_weights().len() - k..].iter().sum::<f64>()
        } else {
            0.0
        };
    let delta_h = (1.0 - h_sigma) * cc * (2.0 - cc);
    let (c1, cmu) = (params.c1, params.c_mu);
    let mut c = &state.c * (1.0 + c1 * delta_h - c1 - cmu * weight_sum);
    c += &state.p_c * state.p_c.transpose() * c1;
    for (wi, y) in &rank_mu {
        c += y * y.transpose() * (cmu * wi);
    }
    symmetrize(&mut c);
    state.c = c;

    let mut new_sigma = outcome.apply(sigma);
    let lo = stepsize::SIGMA_CLAMP_LOW * state.sigma0;
    let hi = stepsize::SIGMA_CLAMP_HIGH * state.sigma0;
    let mut stop = None;
    if !(new_sigma >= lo && new_sigma <= hi) {
        state.sigma_out_of_range = true;
        stop = Some(StopReason::SigmaOutOfRange);
        new_sigma = if new_sigma.is_nan() { sigma } else { new_sigma.clamp(lo, hi) };
    }
    state.sigma = new_sigma;
    state.m = new_m;
    state.t += 1;
    state.prev_f = Some(current_f);
    state.prev_parents = parents.to_vec();

    if state.c.iter().any(|v| !v.is_finite()) {
        return Ok(Some(StopReason::NotPositiveDefinite));
    }
    let progress = state.t as f64 * (c1 + cmu) * n;
    if progress > state.last_eig_update + 1.0 {
        state.last_eig_update = progress;
        if !state.refresh_eigen()? {
            return Ok(Some(StopReason::NotPositiveDefinite));
        }
    }
    Ok(stop)
}

/// Budget-limited objective wrapper that logs the best-so-far trace.
struct Tracker<'a> {
    objective: &'a mut dyn Objective,
    f_opt: f64,
    budget: u64,
    evals: u64,
    trace: RunTrace,
    best_f: f64,
}

impl Tracker<'_> {
    fn eval(&mut self, x: &DVector<f64>) -> Option<f64> {
        if self.evals >= self.budget {
            return None;
        }
        self.evals += 1;
        let f = self.objective.evaluate(x.as_slice());
        if f < self.best_f {
            self.best_f = f;
            self.trace.record(self.evals, (f - self.f_opt).max(0.0));
        }
        Some(f)
    }

    fn remaining(&self) -> u64 {
        self.budget - self.evals
    }

    fn target_hit(&self) -> bool {
        self.trace.best_precision().is_some_and(|p| p <= FINAL_TARGET)
    }
}

/// A restartable CMA-ES instance owning its random streams.
pub struct ModularCma {
    pub cfg: Configuration,
    pub params: StrategyParameters,
    pub state: CmaState,
    pub bounds: SearchBox,
    pub budget_total: u64,
    pub triggers: Triggers,
    sampler: Sampler,
    boundary_rng: RunRng,
    step_rng: RunRng,
}

/// What one call to [`ModularCma::step`] did.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub selection: Selection,
    pub tpa_probes: Option<(f64, f64)>,
    /// Set when the generation ended the current restart.
    pub stop: Option<StopReason>,
}

impl ModularCma {
    pub fn new(
        cfg: Configuration,
        d: usize,
        bounds: SearchBox,
        mean: DVector<f64>,
        budget_total: u64,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let params = StrategyParameters::new(d, &cfg)?;
        let spec = SamplerSpec::new(cfg.base_sampler, cfg.mirrored, cfg.orthogonal, d)?;
        let sigma0 = default_sigma0(&bounds);
        Ok(ModularCma {
            state: CmaState::new(mean, sigma0),
            sampler: Sampler::new(spec, stream(seed, streams::SAMPLING)),
            boundary_rng: stream(seed, streams::BOUNDARY),
            step_rng: stream(seed, streams::STEP_SIZE),
            cfg,
            params,
            bounds,
            budget_total,
            triggers: Triggers::default(),
        })
    }

    /// Resets the distribution for a new restart; random streams continue.
    pub fn restart(&mut self, lambda: usize, mean: DVector<f64>, sigma0: f64) -> Result<()> {
        self.params = StrategyParameters::with_lambda(self.params.d, lambda, &self.cfg)?;
        let evals = self.state.evals;
        self.state = CmaState::new(mean, sigma0);
        self.state.evals = evals;
        Ok(())
    }

    pub fn step(&mut self, eval: &mut dyn FnMut(&DVector<f64>) -> Option<f64>) -> Result<StepReport> {
        let mut ctx = GenerationContext {
            sampler: &mut self.sampler,
            bounds: &self.bounds,
            boundary_rng: &mut self.boundary_rng,
            step_rng: &mut self.step_rng,
            budget_total: self.budget_total,
        };
        let pop = generate_population(&self.state, &self.params, &self.cfg, &mut ctx)?;
        let selection = evaluate_and_select(pop, &self.state, &self.params, &self.cfg, eval);
        self.state.evals += selection.evals_used;
        for ind in &selection.evaluated {
            self.state.note_best(&ind.x, ind.f);
        }
        if selection.truncated || selection.n_parents == 0 {
            let stop = (selection.n_parents == 0 && !selection.truncated).then_some(StopReason::FlatFitness);
            return Ok(StepReport { selection, tpa_probes: None, stop });
        }

        let mut tpa_probes = None;
        if self.cfg.ssa == SsaMethod::Tpa {
            let new_m = recombine(&self.params, selection.parents());
            let (fwd, bwd) = tpa_probe_points(&self.state.m, &new_m);
            let fwd = correct(&fwd, &self.bounds, self.cfg.bound_correction, &mut self.boundary_rng);
            let bwd = correct(&bwd, &self.bounds, self.cfg.bound_correction, &mut self.boundary_rng);
            if let Some(ff) = eval(&fwd) {
                self.state.evals += 1;
                self.state.note_best(&fwd, ff);
                if let Some(fb) = eval(&bwd) {
                    self.state.evals += 1;
                    self.state.note_best(&bwd, fb);
                    let clean = |f: f64| if f.is_finite() { f } else { f64::INFINITY };
                    tpa_probes = Some((clean(ff), clean(fb)));
                }
            }
        }

        let mut stop = update_distribution(&mut self.state, &selection, &self.params, &self.cfg, tpa_probes)?;
        let best_f = self.state.best.as_ref().map_or(f64::INFINITY, |b| b.1);
        self.state.best_history.push(best_f);
        if stop.is_none() {
            let pop_f: Vec<f64> = selection.evaluated.iter().map(|i| i.f).collect();
            let view = StagnationView {
                d: self.params.d,
                lambda: self.params.lambda,
                best_history: &self.state.best_history,
                population_f: &pop_f,
                sigma: self.state.sigma,
                max_eigen_sqrt: self.state.d.max(),
                condition_number: self.state.condition_number,
                sigma_out_of_range: self.state.sigma_out_of_range,
            };
            stop = should_restart(&view, &self.triggers);
        }
        Ok(StepReport { selection, tpa_probes, stop })
    }
}

pub fn default_sigma0(bounds: &SearchBox) -> f64 {
    SIGMA0_FRACTION * bounds.widths().mean()
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub evals: u64,
    pub restarts: usize,
    pub stop_reasons: Vec<StopReason>,
    pub best_x: Option<DVector<f64>>,
    pub best_f: f64,
}

/// Minimum budget a configuration needs for one generation.
pub fn minimum_budget(params: &StrategyParameters, cfg: &Configuration) -> u64 {
    params.lambda as u64 + if cfg.ssa == SsaMethod::Tpa { 2 } else { 0 }
}

/// Optimizes `problem` until the budget is spent or the final target is hit.
pub fn run(cfg: &Configuration, problem: &mut dyn Objective, budget: u64, seed: u64) -> Result<RunOutcome> {
    cfg.validate()?;
    let d = problem.dim();
    let bounds = problem.search_box();
    let params = StrategyParameters::new(d, cfg)?;
    if budget < minimum_budget(&params, cfg) {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} cannot pay for one generation ({} evaluations)",
            minimum_budget(&params, cfg)
        )));
    }
    let mut restart_rng = stream(seed, streams::RESTART);
    let mean = bounds.sample_uniform(&mut restart_rng);
    let mut cma = ModularCma::new(cfg.clone(), d, bounds.clone(), mean, budget, seed)?;
    let mut ledger = RestartLedger::new(params.lambda);
    let sigma0 = default_sigma0(&bounds);
    let f_opt = problem.optimum().unwrap_or(0.0);
    let mut tracker = Tracker {
        objective: problem,
        f_opt,
        budget,
        evals: 0,
        trace: RunTrace::new(budget),
        best_f: f64::INFINITY,
    };
    let mut stop_reasons = Vec::new();
    let mut restart_start = 0u64;

    loop {
        let report = cma.step(&mut |x| tracker.eval(x))?;
        if tracker.target_hit() || report.selection.truncated || tracker.remaining() == 0 {
            break;
        }
        let Some(reason) = report.stop else { continue };
        stop_reasons.push(reason);
        ledger.charge(tracker.evals - restart_start);
        restart_start = tracker.evals;
        let Some(plan) = next_restart_config(&mut ledger, cfg.restart, tracker.remaining(), &mut restart_rng)
        else {
            break;
        };
        let mean = bounds.sample_uniform(&mut restart_rng);
        cma.restart(plan.lambda, mean, sigma0 * plan.sigma_factor)?;
    }

    let (best_x, best_f) = match cma.state.best.take() {
        Some((x, f)) => (Some(x), f),
        None => (None, f64::INFINITY),
    };
    Ok(RunOutcome {
        evals: tracker.evals,
        trace: tracker.trace,
        restarts: ledger.restarts,
        stop_reasons,
        best_x,
        best_f: best_f.min(tracker.best_f),
    })
}
