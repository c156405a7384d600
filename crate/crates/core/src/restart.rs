//! Stagnation triggers and the IPOP / BIPOP population schedules.

use rand::Rng;

use crate::config::RestartStrategy;

pub const TOL_FLAT_HISTORY: f64 = 1e-12;
pub const MAX_CONDITION: f64 = 1e14;
pub const TOL_STEP: f64 = 1e-12;
pub const TOL_FUN_RANGE: f64 = 1e-12;
pub const IPOP_FACTOR: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// Best f improved by less than the tolerance over the history window.
    FlatHistory,
    ConditionNumber,
    StepTooSmall,
    FlatFitness,
    SigmaOutOfRange,
    /// The covariance matrix could not be kept positive definite.
    NotPositiveDefinite,
}

/// Individually switchable stagnation triggers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triggers {
    pub flat_history: bool,
    pub condition: bool,
    pub step: bool,
    pub flat_fitness: bool,
    pub sigma_clamp: bool,
}

impl Default for Triggers {
    fn default() -> Self {
        Triggers { flat_history: true, condition: true, step: true, flat_fitness: true, sigma_clamp: true }
    }
}

/// What the trigger check needs to see about the current restart.
#[derive(Clone, Debug)]
pub struct StagnationView<'a> {
    pub d: usize,
    pub lambda: usize,
    /// Best f after each completed generation of this restart.
    pub best_history: &'a [f64],
    /// f-values evaluated in the latest generation.
    pub population_f: &'a [f64],
    pub sigma: f64,
    pub max_eigen_sqrt: f64,
    pub condition_number: f64,
    pub sigma_out_of_range: bool,
}

pub fn history_window(d: usize, lambda: usize) -> usize {
    10 + (30 * d).div_ceil(lambda)
}

pub fn should_restart(view: &StagnationView<'_>, triggers: &Triggers) -> Option<StopReason> {
    if view.best_history.is_empty() {
        return None;
    }
    if triggers.sigma_clamp && view.sigma_out_of_range {
        return Some(StopReason::SigmaOutOfRange);
    }
    if triggers.condition && !(view.condition_number <= MAX_CONDITION) {
        return Some(StopReason::ConditionNumber);
    }
    if triggers.step && view.sigma * view.max_eigen_sqrt < TOL_STEP {
        return Some(StopReason::StepTooSmall);
    }
    if triggers.flat_fitness && !view.population_f.is_empty() {
        let finite = view.population_f.iter().filter(|f| f.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &f| (lo.min(f), hi.max(f)));
        if hi >= lo && hi - lo < TOL_FUN_RANGE {
            return Some(StopReason::FlatFitness);
        }
    }
    if triggers.flat_history {
        let w = history_window(view.d, view.lambda);
        let h = view.best_history;
        if h.len() > w && h[h.len() - 1 - w] - h[h.len() - 1] < TOL_FLAT_HISTORY {
            return Some(StopReason::FlatHistory);
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Large,
    Small,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestartLedger {
    pub history: Vec<Regime>,
    pub budget_used_large: u64,
    pub budget_used_small: u64,
    pub lambda_base: usize,
    pub lambda_large: usize,
    /// λ of the restart currently running.
    pub lambda_current: usize,
    pub restarts: usize,
    large_restarts: u32,
}

/// Population size and initial step-size factor for the next restart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RestartPlan {
    pub lambda: usize,
    /// Multiplies the default initial step size.
    pub sigma_factor: f64,
    pub regime: Regime,
}

impl RestartLedger {
    /// The first run counts towards the large-population regime.
    pub fn new(lambda_base: usize) -> Self {
        RestartLedger {
            history: vec![Regime::Large],
            budget_used_large: 0,
            budget_used_small: 0,
            lambda_base,
            lambda_large: lambda_base,
            lambda_current: lambda_base,
            restarts: 0,
            large_restarts: 0,
        }
    }

    /// Charges evaluations to the regime that is currently running.
    pub fn charge(&mut self, evals: u64) {
        match self.history.last() {
            Some(Regime::Small) => self.budget_used_small += evals,
            _ => self.budget_used_large += evals,
        }
    }

    pub fn large_restarts(&self) -> u32 {
        self.large_restarts
    }
}

/// Picks the next population size, or `None` when the remaining budget
/// cannot pay for one generation (plus TPA's two probes).
pub fn next_restart_config<R: Rng + ?Sized>(
    ledger: &mut RestartLedger,
    strategy: RestartStrategy,
    remaining_budget: u64,
    rng: &mut R,
) -> Option<RestartPlan> {
    let plan = match strategy {
        RestartStrategy::Off => return None,
        RestartStrategy::Ipop => RestartPlan {
            lambda: ledger.lambda_current * IPOP_FACTOR,
            sigma_factor: 1.0,
            regime: Regime::Large,
        },
        RestartStrategy::Bipop => {
            if ledger.budget_used_large <= ledger.budget_used_small {
                RestartPlan {
                    lambda: ledger.lambda_large * IPOP_FACTOR,
                    sigma_factor: 1.0,
                    regime: Regime::Large,
                }
            } else {
                let u: f64 = rng.random();
                let u2: f64 = rng.random();
                let ratio = ledger.lambda_large as f64 / ledger.lambda_base as f64;
                let lambda = ((ledger.lambda_base as f64 * ratio.powf(u * u)) / 2.0).floor() as usize;
                RestartPlan {
                    lambda: lambda.max(2),
                    sigma_factor: 2.0 * 10f64.powf(-2.0 * u2),
                    regime: Regime::Small,
                }
            }
        }
    };
    if remaining_budget < plan.lambda as u64 + 2 {
        return None;
    }
    ledger.restarts += 1;
    ledger.lambda_current = plan.lambda;
    ledger.history.push(plan.regime);
    if plan.regime == Regime::Large && strategy == RestartStrategy::Bipop {
        ledger.large_restarts += 1;
        ledger.lambda_large = plan.lambda;
    }
    if strategy == RestartStrategy::Ipop {
        ledger.large_restarts += 1;
        ledger.lambda_large = plan.lambda;
    }
    Some(plan)
}
