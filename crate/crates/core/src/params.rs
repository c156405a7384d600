//! Strategy parameters: population sizes, recombination weights and learning rates.

use crate::config::{Configuration, WeightsOption};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyParameters {
    pub d: usize,
    pub lambda: usize,
    pub mu: usize,
    /// Length `mu` without active update; length `lambda` (negative tail) with it.
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c1: f64,
    pub c_mu: f64,
    pub c_c: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub chi_d: f64,
}

/// `E||N(0, I_d)||` by its usual series approximation.
pub fn expected_norm(d: usize) -> f64 {
    let n = d as f64;
    n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))
}

pub fn default_lambda(d: usize) -> usize {
    4 + (3.0 * (d as f64).ln()).floor() as usize
}

/// Raw `1/2^i + 1/(λ 2^λ)` for `i = 1..=count`.
pub fn half_power_lambda_weights(lambda: usize, count: usize) -> Vec<f64> {
    let tail = 1.0 / (lambda as f64 * 2f64.powi(lambda as i32));
    (1..=count).map(|i| 0.5f64.powi(i as i32) + tail).collect()
}

/// Unnormalized log-rank weights `ln((λ+1)/2) - ln i` for `i = 1..=λ`.
fn log_rank_weights(lambda: usize) -> Vec<f64> {
    let top = ((lambda as f64 + 1.0) / 2.0).ln();
    (1..=lambda).map(|i| top - (i as f64).ln()).collect()
}

pub fn mu_eff_of(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    s * s / s2
}

fn normalize(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
}

impl StrategyParameters {
    pub fn new(d: usize, cfg: &Configuration) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        let lambda = cfg.lambda.unwrap_or_else(|| default_lambda(d));
        Self::with_lambda(d, lambda, cfg)
    }

    /// Defaults for an explicit population size (used by restarts).
    pub fn with_lambda(d: usize, lambda: usize, cfg: &Configuration) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if lambda < 2 {
            return Err(Error::InvalidConfig(format!("lambda = {lambda} must be at least 2")));
        }
        let n = d as f64;
        let mu = lambda / 2;
        let raw = log_rank_weights(lambda);
        let mut positive = match cfg.weights {
            WeightsOption::Default => raw[..mu].to_vec(),
            WeightsOption::Equal => vec![1.0; mu],
            WeightsOption::HalfPowerLambda => half_power_lambda_weights(lambda, mu),
        };
        normalize(&mut positive);
        let mu_eff = mu_eff_of(&positive);

        let mut c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let mut c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let mut c1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let alpha_mu = 2.0;
        let mut c_mu = (1.0 - c1)
            .min(alpha_mu * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + alpha_mu * mu_eff / 2.0));

        if let Some(v) = cfg.c_c {
            c_c = v;
        }
        if let Some(v) = cfg.c_sigma {
            c_sigma = v;
        }
        if let Some(v) = cfg.c1 {
            c1 = v;
        }
        if let Some(v) = cfg.c_mu {
            c_mu = v;
        }
        if c1 + c_mu > 1.0 {
            let s = 1.0 / (c1 + c_mu + 1e-12);
            c1 *= s;
            c_mu *= s;
        }
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;

        let mut weights = positive;
        if cfg.active && lambda > mu {
            let negative_raw = &raw[mu..];
            let mu_eff_neg = mu_eff_of(negative_raw);
            let alpha_mu_neg = if c_mu > 0.0 { 1.0 + c1 / c_mu } else { f64::INFINITY };
            let alpha_mu_eff_neg = 1.0 + 2.0 * mu_eff_neg / (mu_eff + 2.0);
            let alpha_posdef = if c_mu > 0.0 { (1.0 - c1 - c_mu) / (n * c_mu) } else { 0.0 };
            let scale = alpha_mu_neg.min(alpha_mu_eff_neg).min(alpha_posdef).max(0.0);
            let neg_sum: f64 = negative_raw.iter().map(|w| w.abs()).sum();
            if neg_sum > 0.0 {
                weights.extend(negative_raw.iter().map(|w| scale * w / neg_sum));
            }
        }

        Ok(StrategyParameters {
            d,
            lambda,
            mu,
            weights,
            mu_eff,
            c1,
            c_mu,
            c_c,
            c_sigma,
            d_sigma,
            chi_d: expected_norm(d),
        })
    }

    pub fn positive_weights(&self) -> &[f64] {
        &self.weights[..self.mu]
    }

    pub fn negative_weights(&self) -> &[f64] {
        &self.weights[self.mu..]
    }
}
