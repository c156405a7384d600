use std::time::Instant;

use modcma_core::rng::{mix_seed, stream};
use modcma_core::tuner::{
    build_space, iterated_race, verify, ContinuousDim, Evaluator, ProblemEvaluator, SearchSpace, SpaceExtension,
};
use modcma_core::{Configuration, FunctionId, Result, SsaMethod};

/// One categorical option beats everything else on every seed.
struct Dominant;

impl Evaluator for Dominant {
    fn evaluate(&self, cfg: &Configuration, seed: u64) -> Result<f64> {
        let noise = (mix_seed(seed, cfg.to_json().len() as u64) % 1000) as f64 / 1000.0;
        let others = cfg.active as u8 as f64 + cfg.elitist as u8 as f64 + 2.0 * noise;
        Ok(if cfg.ssa == SsaMethod::Tpa { others } else { 10.0 + others })
    }
    fn worst_case(&self) -> f64 {
        1e6
    }
}

#[test]
fn dominant_option_is_recovered() {
    let space = build_space(&[SpaceExtension::None], 5).unwrap();
    let start = Instant::now();
    for seed in 0..20 {
        let r = iterated_race(&space, &Dominant, 200, &mut stream(seed, 0)).unwrap();
        assert!(r.calls <= 200);
        assert!(r.elites.iter().any(|e| e.config.ssa == SsaMethod::Tpa), "seed {seed}");
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

/// Quadratic bowl over the four learning rates with small seeded noise.
struct Bowl([f64; 4]);

impl Evaluator for Bowl {
    fn evaluate(&self, cfg: &Configuration, seed: u64) -> Result<f64> {
        let names = ["c1", "c_mu", "c_c", "c_sigma"];
        let noise = (mix_seed(seed, 7) % 1000) as f64 / 1e6;
        Ok(names.iter().zip(self.0).map(|(n, o)| (cfg.continuous(n).unwrap_or(0.5) - o).powi(2)).sum::<f64>() + noise)
    }
    fn worst_case(&self) -> f64 {
        1e6
    }
}

#[test]
fn continuous_elites_approach_the_optimum() {
    let cont = |name: &str, lower_open| ContinuousDim { name: name.into(), lower: 0.0, upper: 1.0, lower_open };
    let space = SearchSpace::new(
        vec![],
        vec![cont("c1", false), cont("c_mu", false), cont("c_c", true), cont("c_sigma", true)],
        5,
    )
    .unwrap();
    let opt = [0.3, 0.6, 0.2, 0.7];
    let mut good = 0;
    for seed in 0..20 {
        let r = iterated_race(&space, &Bowl(opt), 1000, &mut stream(seed, 1)).unwrap();
        let best = &r.elites[0].config;
        let names = ["c1", "c_mu", "c_c", "c_sigma"];
        if names.iter().zip(opt).all(|(n, o)| (best.continuous(n).unwrap_or(0.5) - o).abs() <= 0.1) {
            good += 1;
        }
    }
    assert!(good >= 18, "{good}/20");
}

#[test]
fn tuning_is_reproducible() {
    let space = build_space(&[SpaceExtension::SsaNew], 2).unwrap();
    let ev = ProblemEvaluator { budget: 400, ..ProblemEvaluator::new(FunctionId::Sphere, 2, 1) };
    let a = iterated_race(&space, &ev, 60, &mut stream(9, 0)).unwrap();
    let b = iterated_race(&space, &ev, 60, &mut stream(9, 0)).unwrap();
    assert_eq!(a.elites, b.elites);
    assert_eq!(a.log, b.log);
    let va = verify(&a.elites, &ev, 25, 100).unwrap();
    assert!(va.iter().all(|e| e.verified_aoc.len() == 25));
}
