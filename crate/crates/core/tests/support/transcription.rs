//! One generation of the default algorithm against a literal, array-based
//! transcription of the standard CMA-ES update equations.

use modcma_core::cma::ModularCma;
use modcma_core::{Configuration, SearchBox};
use nalgebra::DVector;

pub struct Expected {
    pub m: Vec<f64>,
    pub sigma: f64,
    pub c: [[f64; 2]; 2],
}

pub fn transcription(m: &[f64], sigma: f64, zs: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> Expected {
    let n = 2.0f64;
    let lambda = zs.len();
    let mu = lambda / 2;
    let w_raw: Vec<f64> = (1..=mu).map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln()).collect();
    let w_sum: f64 = w_raw.iter().sum();
    let w: Vec<f64> = w_raw.iter().map(|x| x / w_sum).collect();
    let mu_eff = 1.0 / w.iter().map(|x| x * x).sum::<f64>();

    let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
    let c_s = (mu_eff + 2.0) / (n + mu_eff + 5.0);
    let c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
    let c_mu = f64::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) * (n + 2.0) + mu_eff));
    let d_s = 1.0 + 2.0 * f64::max(0.0, ((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0) + c_s;
    let chi = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    // x_k = m + σ y_k with C = I, so y_k = z_k.
    let xs: Vec<Vec<f64>> = zs.iter().map(|z| vec![m[0] + sigma * z[0], m[1] + sigma * z[1]]).collect();
    let mut order: Vec<usize> = (0..lambda).collect();
    order.sort_by(|&a, &b| f(&xs[a]).partial_cmp(&f(&xs[b])).unwrap());

    let mut yw = [0.0; 2];
    for i in 0..mu {
        for j in 0..2 {
            yw[j] += w[i] * zs[order[i]][j];
        }
    }
    let m_new = vec![m[0] + sigma * yw[0], m[1] + sigma * yw[1]];

    // p_σ ← (1-c_σ)·0 + sqrt(c_σ(2-c_σ)μ_eff)·C^{-1/2}<y>, with C^{-1/2} = I.
    let ps_coef = (c_s * (2.0 - c_s) * mu_eff).sqrt();
    let ps = [ps_coef * yw[0], ps_coef * yw[1]];
    let ps_norm = (ps[0] * ps[0] + ps[1] * ps[1]).sqrt();
    let h_s = if ps_norm / (1.0 - (1.0 - c_s).powi(2)).sqrt() < (1.4 + 2.0 / (n + 1.0)) * chi { 1.0 } else { 0.0 };
    let pc_coef = h_s * (c_c * (2.0 - c_c) * mu_eff).sqrt();
    let pc = [pc_coef * yw[0], pc_coef * yw[1]];
    let delta = (1.0 - h_s) * c_c * (2.0 - c_c);

    let mut c = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let identity = if a == b { 1.0 } else { 0.0 };
            let mut rank_mu = 0.0;
            for i in 0..mu {
                let y = &zs[order[i]];
                rank_mu += w[i] * y[a] * y[b];
            }
            c[a][b] = (1.0 + c_1 * delta - c_1 - c_mu) * identity + c_1 * pc[a] * pc[b] + c_mu * rank_mu;
        }
    }
    let sigma_new = sigma * ((c_s / d_s) * (ps_norm / chi - 1.0)).exp();
    Expected { m: m_new, sigma: sigma_new, c }
}

/// Largest deviation of `(m, C, σ)` from the transcription after one generation, over the given seeds.
pub fn first_generation_error(seeds: &[u64]) -> f64 {
    let mut worst = 0.0f64;
    for &seed in seeds {
        let bounds = SearchBox::uniform(2, -5.0, 5.0).unwrap();
        let m0 = DVector::from_vec(vec![1.5, -0.5]);
        let mut cma = ModularCma::new(Configuration::default(), 2, bounds, m0.clone(), 20_000, seed).unwrap();
        let sigma0 = cma.state.sigma;
        let sphere = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let report = cma.step(&mut |x| Some(sphere(x.as_slice()))).unwrap();
        let zs: Vec<Vec<f64>> = report.selection.evaluated.iter().map(|i| i.z.iter().copied().collect()).collect();
        assert_eq!(zs.len(), 6);

        let exp = transcription(m0.as_slice(), sigma0, &zs, sphere);
        for j in 0..2 {
            worst = worst.max((cma.state.m[j] - exp.m[j]).abs());
            for k in 0..2 {
                worst = worst.max((cma.state.c[(j, k)] - exp.c[j][k]).abs());
            }
        }
        worst = worst.max((cma.state.sigma - exp.sigma).abs() / exp.sigma.max(1.0));
    }
    worst
}
