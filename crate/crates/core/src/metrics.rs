//! Fixed-target hitting times, the ECDF over a target set, and the
//! area over that ECDF (AOC), which serves as the scalar fitness of a
//! configuration everywhere else.
//!
//! The integral of the ECDF over `[1, B]` is taken as the unit-step sum
//! `Σ_{t=1}^{B} F(t)`. Each (run, target) pair hit at time `T ≤ B`
//! contributes `B - T + 1` unit steps, so the area can be accumulated from
//! hitting times alone in exact integer arithmetic.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TARGET_COUNT: usize = 51;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub config_id: String,
    pub fid: String,
    pub iid: u64,
    pub seed: u64,
}

/// Best-so-far precision of one run, recorded at every strict improvement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub improvements: Vec<(u64, f64)>,
    pub budget: u64,
    pub meta: TraceMeta,
}

impl RunTrace {
    pub fn new(budget: u64) -> Self {
        RunTrace { improvements: Vec::new(), budget, meta: TraceMeta::default() }
    }

    /// Records `precision` at evaluation `evals` if it improves the best so far.
    pub fn record(&mut self, evals: u64, precision: f64) -> bool {
        let better = match self.improvements.last() {
            Some(&(_, best)) => precision < best,
            None => true,
        };
        if better {
            debug_assert!(self.improvements.last().is_none_or(|&(e, _)| e < evals));
            self.improvements.push((evals, precision));
        }
        better
    }

    pub fn best_precision(&self) -> Option<f64> {
        self.improvements.last().map(|&(_, p)| p)
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.improvements.windows(2) {
            if !(w[0].0 < w[1].0 && w[0].1 > w[1].1) {
                return Err(Error::Parse("trace must improve strictly at increasing evals".into()));
            }
        }
        if let Some(&(first, _)) = self.improvements.first() {
            if first < 1 {
                return Err(Error::Parse("evaluation counts start at 1".into()));
            }
        }
        if let Some(&(last, _)) = self.improvements.last() {
            if last > self.budget {
                return Err(Error::Parse(format!("trace exceeds its budget {}", self.budget)));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "evals,best_precision")?;
        for (e, p) in &self.improvements {
            writeln!(out, "{e},{p:e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, budget: u64) -> Result<Self> {
        let mut lines = input.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "evals,best_precision" => {}
            _ => return Err(Error::Parse("trace CSV must start with `evals,best_precision`".into())),
        }
        let mut trace = RunTrace::new(budget);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (e, p) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad trace row `{line}`")))?;
            let e: u64 = e.trim().parse().map_err(|_| Error::Parse(format!("bad evals `{e}`")))?;
            let p: f64 = p.trim().parse().map_err(|_| Error::Parse(format!("bad precision `{p}`")))?;
            trace.improvements.push((e, p));
        }
        trace.validate()?;
        Ok(trace)
    }
}

/// Log-spaced targets from 1e2 down to 1e-8.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetSet {
    values: Vec<f64>,
}

impl TargetSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("targets must be finite and non-empty".into()));
        }
        Ok(TargetSet { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Default for TargetSet {
    fn default() -> Self {
        default_targets()
    }
}

pub fn default_targets() -> TargetSet {
    let values = (0..TARGET_COUNT).map(|k| 10f64.powf(2.0 - k as f64 / 5.0)).collect();
    TargetSet { values }
}

/// First evaluation at which the trace reaches precision `v`; `None` if never.
pub fn hitting_time(trace: &RunTrace, v: f64) -> Option<u64> {
    trace.improvements.iter().find(|&&(_, p)| p <= v).map(|&(e, _)| e)
}

fn check_traces(traces: &[RunTrace]) -> Result<u64> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidArgument("no traces to aggregate".into()))?;
    if traces.iter().any(|t| t.budget != first.budget) {
        return Err(Error::InvalidArgument("traces must share one budget".into()));
    }
    Ok(first.budget)
}

/// Fraction of (run, target) pairs hit within `t` evaluations.
pub fn ecdf(traces: &[RunTrace], targets: &TargetSet, t: u64) -> Result<f64> {
    check_traces(traces)?;
    let hits = traces
        .iter()
        .flat_map(|tr| targets.values.iter().map(move |&v| hitting_time(tr, v)))
        .filter(|h| matches!(h, Some(e) if *e <= t))
        .count();
    Ok(hits as f64 / (traces.len() * targets.len()) as f64)
}

/// AOC together with its exact rational representation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AocScore {
    pub aoc: f64,
    pub auc: f64,
    pub budget: u64,
    pub n_runs: usize,
    /// `Σ (B - T + 1)` over hit (run, target) pairs; `auc = area_steps / pairs`.
    pub area_steps: u128,
    pub pairs: u128,
}

impl AocScore {
    /// Numerator of the AOC over `pairs`; `aoc_steps + area_steps = B · pairs` exactly.
    pub fn aoc_steps(&self) -> u128 {
        self.budget as u128 * self.pairs - self.area_steps
    }
}

/// Area over the ECDF curve on `[1, budget]`. Lower is better.
pub fn aoc(traces: &[RunTrace], targets: &TargetSet, budget: u64) -> Result<AocScore> {
    if traces.is_empty() {
        return Err(Error::InvalidArgument("no traces to aggregate".into()));
    }
    let mut area: u128 = 0;
    for tr in traces {
        for &v in &targets.values {
            if let Some(h) = hitting_time(tr, v) {
                if h <= budget {
                    area += (budget - h.max(1) + 1) as u128;
                }
            }
        }
    }
    let pairs = (traces.len() * targets.len()) as u128;
    let aoc_steps = budget as u128 * pairs - area;
    Ok(AocScore {
        aoc: aoc_steps as f64 / pairs as f64,
        auc: area as f64 / pairs as f64,
        budget,
        n_runs: traces.len(),
        area_steps: area,
        pairs,
    })
}

/// AOC of a single run against the default targets, on the run's own budget.
pub fn run_aoc(trace: &RunTrace) -> f64 {
    aoc(std::slice::from_ref(trace), &default_targets(), trace.budget)
        .expect("one trace")
        .aoc
}

pub const SCORE_HEADER: &str = "config_id,fid,iid,n_runs,budget,aoc";

pub fn score_row(config_id: &str, fid: &str, iid: u64, score: &AocScore) -> String {
    format!("{config_id},{fid},{iid},{},{},{}", score.n_runs, score.budget, score.aoc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace(points: &[(u64, f64)], budget: u64) -> RunTrace {
        RunTrace { improvements: points.to_vec(), budget, meta: TraceMeta::default() }
    }

    #[test]
    fn default_target_set() {
        let t = default_targets();
        assert_eq!(t.len(), 51);
        assert_eq!(t.values()[0], 100.0);
        assert!((t.values()[50] - 1e-8).abs() <= 1e-8 * 1e-12);
        let r = 10f64.powf(0.2);
        for w in t.values().windows(2) {
            assert!((w[0] / w[1] - r).abs() <= 1e-12 * r);
        }
    }

    #[test]
    fn hitting_times() {
        let t = trace(&[(10, 5.0), (20, 0.5)], 100);
        assert_eq!(hitting_time(&t, 1.0), Some(20));
        assert_eq!(hitting_time(&t, 10.0), Some(10));
        assert_eq!(hitting_time(&t, 0.1), None);
    }

    #[test]
    fn ecdf_examples() {
        let all = TargetSet::new(vec![1.0, 0.5]).unwrap();
        assert_eq!(ecdf(&[trace(&[(1, 0.0)], 10)], &all, 1).unwrap(), 1.0);
        assert_eq!(ecdf(&[trace(&[(1, 5.0)], 10)], &all, 10).unwrap(), 0.0);
        let two = [trace(&[(3, 0.7)], 10), trace(&[(2, 0.1)], 10)];
        assert_eq!(ecdf(&two, &all, 5).unwrap(), 0.75);
        assert!(ecdf(&[], &all, 5).is_err());
    }

    #[test]
    fn aoc_examples() {
        let v = default_targets();
        let perfect = aoc(&[trace(&[(1, 0.0)], 1000)], &v, 1000).unwrap();
        assert_eq!((perfect.aoc, perfect.auc), (0.0, 1000.0));
        let nothing = aoc(&[trace(&[(1, 1e3)], 1000)], &v, 1000).unwrap();
        assert_eq!(nothing.aoc, 1000.0);
        let single = TargetSet::new(vec![1.0]).unwrap();
        let s = aoc(&[trace(&[(37, 0.5)], 1000)], &single, 1000).unwrap();
        assert_eq!(s.aoc, 36.0);
    }

    #[test]
    fn csv_round_trip() {
        let t = trace(&[(1, 12.5), (9, 1e-3), (40, 3.2e-9)], 50);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = RunTrace::read_csv(buf.as_slice(), 50).unwrap();
        assert_eq!(back.improvements, t.improvements);
        assert!(RunTrace::read_csv("x,y\n".as_bytes(), 5).is_err());
        assert!(RunTrace::read_csv("evals,best_precision\n5,1\n3,0.5\n".as_bytes(), 9).is_err());
    }

    fn arb_trace(budget: u64) -> impl Strategy<Value = RunTrace> {
        prop::collection::vec((1u64..=budget, -9.0f64..3.0), 0..12).prop_map(move |mut pts| {
            pts.sort_by_key(|p| p.0);
            let mut t = RunTrace::new(budget);
            let mut best = f64::INFINITY;
            for (e, lp) in pts {
                let p = 10f64.powf(lp);
                if p < best && t.improvements.last().is_none_or(|l| l.0 < e) {
                    t.improvements.push((e, p));
                    best = p;
                }
            }
            t
        })
    }

    proptest! {
        #[test]
        fn aoc_bounds_and_identity(traces in prop::collection::vec(arb_trace(300), 1..5)) {
            let v = default_targets();
            let s = aoc(&traces, &v, 300).unwrap();
            prop_assert_eq!(s.aoc_steps() + s.area_steps, 300 * s.pairs);
            prop_assert!(s.aoc >= 0.0 && s.aoc <= 300.0);
        }

        #[test]
        fn extra_hit_never_hurts(tr in arb_trace(200), at in 1u64..=200) {
            let v = default_targets();
            let before = aoc(std::slice::from_ref(&tr), &v, 200).unwrap().aoc;
            // Inject a perfect hit at `at` and rebuild a valid trace.
            let mut pts: Vec<(u64, f64)> = tr.improvements.iter().copied().filter(|p| p.0 < at).collect();
            pts.push((at, 0.0));
            let after = aoc(&[trace(&pts, 200)], &v, 200).unwrap().aoc;
            prop_assert!(after <= before);
        }
    }
}
