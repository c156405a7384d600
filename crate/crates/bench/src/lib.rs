//! Fixtures for the benchmarks under `benches/`.

use modcma_core::metrics::RunTrace;
use nalgebra::DMatrix;

/// A well-conditioned symmetric positive definite matrix with a fixed pattern.
pub fn spd_matrix(d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |i, j| ((i * 7 + j * 13) % 17) as f64 / 17.0 - 0.5);
    &a * a.transpose() + DMatrix::identity(d, d) * d as f64
}

/// `n` traces that improve geometrically every `step` evaluations.
pub fn geometric_traces(n: usize, budget: u64, step: u64) -> Vec<RunTrace> {
    (0..n)
        .map(|r| {
            let mut t = RunTrace::new(budget);
            let mut p = 1e3;
            let mut e = 1 + r as u64;
            while e <= budget {
                t.record(e, p);
                p *= 0.7;
                e += step;
            }
            t
        })
        .collect()
}
