//! Step-size adaptation rules, called once per generation.
//!
//! Every rule but p-xNES returns a multiplicative factor for σ; p-xNES
//! returns the new σ directly. The success-based rules (TPA, MSR, PSR) share
//! one smoothed accumulator `s` stored in the run state.

use nalgebra::{DMatrix, DVector};

use crate::config::SsaMethod;

/// TPA smoothing rate.
pub const TPA_C_ALPHA: f64 = 0.3;
/// TPA probe distance, as a fraction of the mean shift.
pub const TPA_ALPHA: f64 = 0.5;
/// MSR compares against this quantile of the previous population.
pub const MSR_QUANTILE: f64 = 0.3;
pub const MSR_C_S: f64 = 0.3;
/// PSR target success rate.
pub const PSR_TARGET: f64 = 0.25;
pub const PSR_C_S: f64 = 0.9;

/// σ must stay within these factors of its initial value.
pub const SIGMA_CLAMP_LOW: f64 = 1e-14;
pub const SIGMA_CLAMP_HIGH: f64 = 1e14;

/// p-xNES log-normal spread, `1/sqrt(2d)`.
pub fn p_xnes_tau(d: usize) -> f64 {
    1.0 / (2.0 * d as f64).sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SsaState {
    pub s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SsaOutcome {
    Multiplier(f64),
    NewSigma(f64),
}

impl SsaOutcome {
    pub fn apply(self, sigma: f64) -> f64 {
        match self {
            SsaOutcome::Multiplier(m) => sigma * m,
            SsaOutcome::NewSigma(s) => s,
        }
    }
}

/// Everything a rule may look at. Ranked slices are aligned with `weights`.
#[derive(Clone, Debug)]
pub struct SsaInput<'a> {
    /// f-values of every candidate evaluated this generation (any order).
    pub current_f: &'a [f64],
    /// f-values of the previous generation, if there was one.
    pub previous_f: Option<&'a [f64]>,
    /// Base samples of the selected parents, best first.
    pub selected_z: &'a [&'a DVector<f64>],
    /// Trial step sizes of the selected parents, best first (p-xNES only).
    pub selected_trial_sigma: &'a [Option<f64>],
    /// Positive recombination weights of the selected parents.
    pub weights: &'a [f64],
    pub old_mean: &'a DVector<f64>,
    pub new_mean: &'a DVector<f64>,
    pub sigma: f64,
    pub p_sigma: &'a DVector<f64>,
    pub eigenvectors: &'a DMatrix<f64>,
    /// Square roots of the covariance eigenvalues.
    pub eigen_sqrt: &'a DVector<f64>,
    pub mu_eff: f64,
    pub chi_d: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    /// f at the forward and backward TPA probes.
    pub tpa_probes: Option<(f64, f64)>,
}

pub fn csa_multiplier(p_sigma_norm: f64, chi_d: f64, c_sigma: f64, d_sigma: f64) -> f64 {
    ((c_sigma / d_sigma) * (p_sigma_norm / chi_d - 1.0)).exp()
}

/// `+1` when the forward probe is better, `-1` when the backward one is, `0` on a tie.
pub fn tpa_update(forward_f: f64, backward_f: f64, state: &mut SsaState, d_sigma: f64) -> f64 {
    let z = if forward_f < backward_f {
        1.0
    } else if backward_f < forward_f {
        -1.0
    } else {
        0.0
    };
    state.s = (1.0 - TPA_C_ALPHA) * state.s + TPA_C_ALPHA * z;
    (state.s / d_sigma).exp()
}

/// The value of rank `ceil(q·n)` (1-based) among `values`.
fn quantile_value(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

pub fn msr_update(current_f: &[f64], previous_f: &[f64], state: &mut SsaState, d_sigma: f64) -> f64 {
    if previous_f.is_empty() || current_f.is_empty() {
        return 1.0;
    }
    let threshold = quantile_value(previous_f, MSR_QUANTILE);
    let k = current_f.iter().filter(|&&f| f < threshold).count() as f64;
    let lambda = current_f.len() as f64;
    let z = (2.0 / lambda) * (k - (lambda + 1.0) / 2.0);
    state.s = (1.0 - MSR_C_S) * state.s + MSR_C_S * z;
    (state.s / d_sigma).exp()
}

/// Joint ranks (1 = best) of `a ++ b`, ties sharing their average rank.
pub fn joint_ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut all: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0.0; all.len()];
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for item in &all[i..=j] {
            ranks[item.1] = avg;
        }
        i = j + 1;
    }
    let rb = ranks.split_off(a.len());
    (ranks, rb)
}

/// Rank-dominance of the current over the previous population, minus the target rate.
pub fn psr_success(current_f: &[f64], previous_f: &[f64]) -> f64 {
    let (rc, rp) = joint_ranks(current_f, previous_f);
    let mean_c = rc.iter().sum::<f64>() / rc.len() as f64;
    let mean_p = rp.iter().sum::<f64>() / rp.len() as f64;
    let half_pool = (rc.len() + rp.len()) as f64 / 2.0;
    (mean_p - mean_c) / half_pool - PSR_TARGET
}

pub fn psr_update(current_f: &[f64], previous_f: &[f64], state: &mut SsaState, d_sigma: f64) -> f64 {
    if previous_f.is_empty() || current_f.is_empty() {
        return 1.0;
    }
    let delta = psr_success(current_f, previous_f);
    state.s = (1.0 - PSR_C_S) * state.s + PSR_C_S * delta;
    (state.s / d_sigma).exp()
}

pub fn xnes_multiplier(selected_z: &[&DVector<f64>], weights: &[f64], chi_d: f64, c_sigma: f64) -> f64 {
    let g: f64 = selected_z
        .iter()
        .zip(weights)
        .map(|(z, w)| w * (z.norm() - chi_d) / chi_d)
        .sum();
    (c_sigma * g).exp()
}

/// `sqrt(mu_eff) · D⁻¹ Bᵀ (m' − m) / σ`.
pub fn standardized_mean_shift(
    eigenvectors: &DMatrix<f64>,
    eigen_sqrt: &DVector<f64>,
    old_mean: &DVector<f64>,
    new_mean: &DVector<f64>,
    sigma: f64,
    mu_eff: f64,
) -> DVector<f64> {
    let shift = eigenvectors.transpose() * (new_mean - old_mean);
    shift.component_div(eigen_sqrt) * (mu_eff.sqrt() / sigma)
}

pub fn m_xnes_multiplier(shift_norm: f64, chi_d: f64, c_sigma: f64) -> f64 {
    (c_sigma * (shift_norm - chi_d) / chi_d).exp()
}

/// Weighted geometric mean of the selected trial step sizes.
pub fn p_xnes_sigma(ranked_trial_sigma: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let log_mean: f64 =
        ranked_trial_sigma.iter().zip(weights).map(|(s, w)| w * s.ln()).sum::<f64>() / total;
    log_mean.exp()
}

/// Dispatches to the configured rule.
pub fn adapt(method: SsaMethod, input: &SsaInput<'_>, state: &mut SsaState) -> SsaOutcome {
    match method {
        SsaMethod::Csa => SsaOutcome::Multiplier(csa_multiplier(
            input.p_sigma.norm(),
            input.chi_d,
            input.c_sigma,
            input.d_sigma,
        )),
        SsaMethod::Tpa => match input.tpa_probes {
            Some((fwd, bwd)) => SsaOutcome::Multiplier(tpa_update(fwd, bwd, state, input.d_sigma)),
            None => SsaOutcome::Multiplier(1.0),
        },
        SsaMethod::Msr => SsaOutcome::Multiplier(match input.previous_f {
            Some(prev) => msr_update(input.current_f, prev, state, input.d_sigma),
            None => 1.0,
        }),
        SsaMethod::Psr => SsaOutcome::Multiplier(match input.previous_f {
            Some(prev) => psr_update(input.current_f, prev, state, input.d_sigma),
            None => 1.0,
        }),
        SsaMethod::Xnes => SsaOutcome::Multiplier(xnes_multiplier(
            input.selected_z,
            input.weights,
            input.chi_d,
            input.c_sigma,
        )),
        SsaMethod::MXnes => {
            let shift = standardized_mean_shift(
                input.eigenvectors,
                input.eigen_sqrt,
                input.old_mean,
                input.new_mean,
                input.sigma,
                input.mu_eff,
            );
            SsaOutcome::Multiplier(m_xnes_multiplier(shift.norm(), input.chi_d, input.c_sigma))
        }
        SsaMethod::PXnes => {
            let trials: Vec<f64> =
                input.selected_trial_sigma.iter().map(|t| t.unwrap_or(input.sigma)).collect();
            SsaOutcome::NewSigma(p_xnes_sigma(&trials, input.weights))
        }
    }
}
