//! Post-processing of stored scores, elites and traces into CSV tables.

use std::collections::{BTreeMap, BTreeSet};

use crate::config::{module_options, Configuration, MODULES};
use crate::error::{Error, Result};
use crate::metrics::{ecdf, hitting_time, RunTrace, TargetSet};
use crate::tuner::{build_space, LogRow, SpaceExtension};

pub const ACTIVATION_HEADER: &str = "function,option,count";
pub const IMPROVEMENT_HEADER: &str = "function,improvement";
pub const DELTA_HEADER: &str = "module,delta";
pub const ERT_HEADER: &str = "target,ert";
pub const ECDF_HEADER: &str = "evals,ecdf";
pub const VBS_HEADER: &str = "function,best_option,aoc,default_aoc,improvement";
pub const INITIAL_HEADER: &str = "config_id,relative_aoc";
/// Label of the unmodified configuration in single-module tables.
pub const DEFAULT_LABEL: &str = "default";
/// Number of points on the ECDF evaluation grid.
pub const ECDF_GRID_POINTS: usize = 51;

/// The default configuration followed by every configuration that differs from
/// it in exactly one module, over the baseline options plus the requested new ones.
pub fn single_module_variants(new_ssa: bool, new_bounds: bool) -> Vec<(String, Configuration)> {
    let mut spaces = vec![build_space(&[], 2).expect("baseline space")];
    if new_ssa {
        spaces.push(build_space(&[SpaceExtension::SsaNew], 2).expect("ssa space"));
    }
    if new_bounds {
        spaces.push(build_space(&[SpaceExtension::BoundaryNew], 2).expect("boundary space"));
    }
    let default = Configuration::default();
    let mut out = vec![(DEFAULT_LABEL.to_string(), default.clone())];
    for m in MODULES {
        let base = default.option(m).unwrap();
        for o in module_options(m).unwrap() {
            let offered = spaces.iter().any(|s| s.categorical.iter().any(|c| c.name == m && c.options.iter().any(|x| x == o)));
            if *o != base && offered {
                let mut cfg = default.clone();
                cfg.set_option(m, o).expect("known option");
                out.push((format!("{m}={o}"), cfg));
            }
        }
    }
    out
}

pub const SCORES_HEADER: &str = "function,option,aoc";

/// Mean AOC of one single-module variant on one function.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleModuleScore {
    pub function: String,
    pub option: String,
    pub aoc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VbsRow {
    pub function: String,
    pub best_option: String,
    pub aoc: f64,
    pub default_aoc: f64,
    pub improvement: Option<f64>,
}

/// `1 - ext/base`; positive when the extension has the lower AOC. Undefined for `base == 0`.
pub fn relative_improvement(ext: f64, base: f64) -> Option<f64> {
    (base != 0.0).then(|| 1.0 - ext / base)
}

/// Best single-module variant per function, in first-appearance order of the functions.
pub fn vbs_single_module(scores: &[SingleModuleScore]) -> Result<Vec<VbsRow>> {
    let mut order: Vec<&str> = Vec::new();
    for s in scores {
        if !order.contains(&s.function.as_str()) {
            order.push(&s.function);
        }
    }
    order
        .into_iter()
        .map(|f| {
            let rows: Vec<&SingleModuleScore> = scores.iter().filter(|s| s.function == f).collect();
            let default = rows
                .iter()
                .find(|s| s.option == DEFAULT_LABEL)
                .ok_or_else(|| Error::InvalidArgument(format!("no default row for function {f}")))?;
            let mut best = *default;
            for r in &rows {
                if r.aoc < best.aoc {
                    best = r;
                }
            }
            Ok(VbsRow {
                function: f.to_string(),
                best_option: best.option.clone(),
                aoc: best.aoc,
                default_aoc: default.aoc,
                improvement: relative_improvement(best.aoc, default.aoc),
            })
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

pub fn vbs_csv(rows: &[VbsRow]) -> String {
    let mut out = format!("{VBS_HEADER}\n");
    for r in rows {
        out += &format!("{},{},{},{},{}\n", r.function, r.best_option, r.aoc, r.default_aoc, fmt_opt(r.improvement));
    }
    out
}

pub fn improvement_csv(rows: &[(String, Option<f64>)]) -> String {
    let mut out = format!("{IMPROVEMENT_HEADER}\n");
    for (f, v) in rows {
        out += &format!("{f},{}\n", fmt_opt(*v));
    }
    out
}

/// Option counts per module over a set of elite configurations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivationTable {
    /// `module -> option -> count`, listing every option of every module.
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
    pub n_elites: usize,
}

impl ActivationTable {
    pub fn count(&self, module: &str, option: &str) -> usize {
        self.counts.get(module).and_then(|m| m.get(option)).copied().unwrap_or(0)
    }

    pub fn fraction(&self, module: &str, option: &str) -> f64 {
        self.count(module, option) as f64 / self.n_elites as f64
    }

    /// Rows of `function,option,count`, options written as `module=option`.
    pub fn csv_rows(&self, function: &str) -> Vec<String> {
        MODULES
            .iter()
            .flat_map(|m| {
                module_options(m)
                    .unwrap()
                    .iter()
                    .map(move |o| format!("{function},{m}={o},{}", self.count(m, o)))
            })
            .collect()
    }

    /// Inverse of [`ActivationTable::csv_rows`] for one function.
    pub fn from_csv_rows(rows: &[String]) -> Result<Self> {
        let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        for row in rows {
            let bad = || Error::Parse(format!("bad activation row `{row}`"));
            let f: Vec<&str> = row.split(',').collect();
            if f.len() != 3 {
                return Err(bad());
            }
            let (m, o) = f[1].split_once('=').ok_or_else(bad)?;
            let c: usize = f[2].parse().map_err(|_| bad())?;
            counts.entry(m.to_string()).or_default().insert(o.to_string(), c);
        }
        let n_elites = counts.values().next().map_or(0, |m| m.values().sum());
        Ok(ActivationTable { counts, n_elites })
    }
}

pub fn activation_counts(elites: &[Configuration]) -> Result<ActivationTable> {
    if elites.is_empty() {
        return Err(Error::InvalidArgument("no elites to count".into()));
    }
    let mut counts = BTreeMap::new();
    for m in MODULES {
        let mut per: BTreeMap<String, usize> =
            module_options(m).unwrap().iter().map(|o| (o.to_string(), 0)).collect();
        for e in elites {
            *per.get_mut(&e.option(m).unwrap()).expect("known option") += 1;
        }
        counts.insert(m.to_string(), per);
    }
    Ok(ActivationTable { counts, n_elites: elites.len() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaSummary {
    /// Per module: fraction-on difference for binary modules, total-variation distance otherwise.
    pub deltas: Vec<(String, f64)>,
}

impl DeltaSummary {
    pub fn get(&self, module: &str) -> Option<f64> {
        self.deltas.iter().find(|d| d.0 == module).map(|d| d.1)
    }

    pub fn csv(&self) -> String {
        let mut out = format!("{DELTA_HEADER}\n");
        for (m, d) in &self.deltas {
            out += &format!("{m},{d}\n");
        }
        out
    }
}

/// Compares the elites of an experiment (`a`) with those of the baseline (`b`).
pub fn distribution_divergence(a: &[Configuration], b: &[Configuration]) -> Result<DeltaSummary> {
    let (ta, tb) = (activation_counts(a)?, activation_counts(b)?);
    let deltas = MODULES
        .iter()
        .map(|&m| {
            let opts = module_options(m).unwrap();
            let d = if opts == ["false", "true"] {
                ta.fraction(m, "true") - tb.fraction(m, "true")
            } else {
                0.5 * opts.iter().map(|o| (ta.fraction(m, o) - tb.fraction(m, o)).abs()).sum::<f64>()
            };
            (m.to_string(), d)
        })
        .collect();
    Ok(DeltaSummary { deltas })
}

/// Expected running time per target: evaluations spent by all runs until they hit
/// (or their budget) over the number of hitting runs. `None` when no run hits.
pub fn ert(traces: &[RunTrace], target: f64) -> Option<f64> {
    let mut spent = 0u64;
    let mut hits = 0u64;
    for t in traces {
        match hitting_time(t, target) {
            Some(h) if h <= t.budget => {
                spent += h;
                hits += 1;
            }
            _ => spent += t.budget,
        }
    }
    (hits > 0).then(|| spent as f64 / hits as f64)
}

/// Log-spaced evaluation counts from 1 to `budget`, without duplicates.
pub fn ecdf_grid(budget: u64) -> Vec<u64> {
    let top = (budget.max(1) as f64).log10();
    let grid: BTreeSet<u64> = (0..ECDF_GRID_POINTS)
        .map(|i| (10f64.powf(top * i as f64 / (ECDF_GRID_POINTS - 1) as f64).round() as u64).clamp(1, budget.max(1)))
        .collect();
    grid.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EcdfErtExport {
    pub ert: Vec<(f64, Option<f64>)>,
    pub ecdf: Vec<(u64, f64)>,
}

impl EcdfErtExport {
    pub fn ert_csv(&self) -> String {
        let mut out = format!("{ERT_HEADER}\n");
        for (v, e) in &self.ert {
            out += &format!("{v:e},{}\n", e.map_or_else(|| "inf".to_string(), |x| x.to_string()));
        }
        out
    }

    pub fn ecdf_csv(&self) -> String {
        let mut out = format!("{ECDF_HEADER}\n");
        for (t, f) in &self.ecdf {
            out += &format!("{t},{f}\n");
        }
        out
    }
}

pub fn export_ecdf_ert(traces: &[RunTrace], targets: &TargetSet) -> Result<EcdfErtExport> {
    let budget = traces
        .first()
        .ok_or_else(|| Error::InvalidArgument("no traces to export".into()))?
        .budget;
    let ert = targets.values().iter().map(|&v| (v, ert(traces, v))).collect();
    let ecdf = ecdf_grid(budget)
        .into_iter()
        .map(|t| Ok((t, ecdf(traces, targets, t)?)))
        .collect::<Result<_>>()?;
    Ok(EcdfErtExport { ert, ecdf })
}

/// Per configuration of the first race: `(AOC_default - AOC_c) / AOC_default` on
/// the seeds both were run on. Positive values mean a lower AOC than the default.
pub fn initial_race_relative(log: &[LogRow], default_id: usize) -> Result<Vec<(usize, Option<f64>)>> {
    let first: Vec<&LogRow> = log.iter().filter(|r| r.iteration == 1).collect();
    let default: BTreeMap<u64, f64> =
        first.iter().filter(|r| r.config_id == default_id).map(|r| (r.seed, r.aoc)).collect();
    if default.is_empty() {
        return Err(Error::InvalidArgument("the first race holds no default-configuration runs".into()));
    }
    let ids: BTreeSet<usize> = first.iter().map(|r| r.config_id).filter(|&c| c != default_id).collect();
    Ok(ids
        .into_iter()
        .map(|id| {
            let (mut sc, mut sd, mut n) = (0.0, 0.0, 0);
            for r in first.iter().filter(|r| r.config_id == id) {
                if let Some(d) = default.get(&r.seed) {
                    sc += r.aoc;
                    sd += d;
                    n += 1;
                }
            }
            let rel = if n == 0 { None } else { relative_improvement(sc / n as f64, sd / n as f64) };
            (id, rel)
        })
        .collect())
}

pub fn initial_csv(rows: &[(usize, Option<f64>)]) -> String {
    let mut out = format!("{INITIAL_HEADER}\n");
    for (id, v) in rows {
        out += &format!("{id},{}\n", fmt_opt(*v));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SsaMethod;
    use crate::metrics::{default_targets, TraceMeta};
    use proptest::prelude::*;

    fn score(f: &str, o: &str, aoc: f64) -> SingleModuleScore {
        SingleModuleScore { function: f.into(), option: o.into(), aoc }
    }

    #[test]
    fn single_module_counts() {
        assert_eq!(single_module_variants(false, false).len(), 14);
        assert_eq!(single_module_variants(true, false).len(), 19);
        assert_eq!(single_module_variants(true, true).len(), 24);
        let v = single_module_variants(false, false);
        assert_eq!(v[0].1, Configuration::default());
        assert!(v.iter().skip(1).all(|(l, c)| c.label() == *l));
    }

    #[test]
    fn table_two_first_row() {
        let rows = vbs_single_module(&[score("f1", DEFAULT_LABEL, 326.0), score("f1", "ssa=tpa", 247.0)]).unwrap();
        assert_eq!(rows[0].best_option, "ssa=tpa");
        let imp = rows[0].improvement.unwrap();
        assert_eq!((imp * 100.0).round(), 24.0);
    }

    #[test]
    fn default_best_gives_zero() {
        let rows = vbs_single_module(&[score("f", DEFAULT_LABEL, 10.0), score("f", "active=true", 11.0)]).unwrap();
        assert_eq!(rows[0].best_option, DEFAULT_LABEL);
        assert_eq!(rows[0].improvement, Some(0.0));
        assert!(vbs_single_module(&[score("f", "active=true", 1.0)]).is_err());
    }

    #[test]
    fn relative_improvement_examples() {
        let r = relative_improvement(1480.0, 1159.0).unwrap();
        assert!((r * 100.0 + 27.7).abs() < 0.05);
        assert_eq!(relative_improvement(5.0, 5.0), Some(0.0));
        assert_eq!(relative_improvement(5.0, 0.0), None);
        assert!(relative_improvement(34_433.0 * 0.829, 34_433.0).unwrap() > 0.0);
    }

    #[test]
    fn activation_counts_reproduce_ssa_tally() {
        let mut elites = Vec::new();
        for (ssa, n) in [(SsaMethod::Psr, 14), (SsaMethod::Msr, 1), (SsaMethod::Csa, 5)] {
            elites.extend((0..n).map(|_| Configuration { ssa, ..Default::default() }));
        }
        let t = activation_counts(&elites).unwrap();
        assert_eq!((t.count("ssa", "psr"), t.count("ssa", "msr"), t.count("ssa", "csa")), (14, 1, 5));
        for m in MODULES {
            assert_eq!(t.counts[m].values().sum::<usize>(), 20);
        }
        let back = ActivationTable::from_csv_rows(&t.csv_rows("f1")).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn divergence_extremes_and_hand_case() {
        let base = vec![Configuration::default(); 4];
        let same = distribution_divergence(&base, &base).unwrap();
        assert!(same.deltas.iter().all(|d| d.1 == 0.0));

        let other = vec![Configuration { ssa: SsaMethod::Tpa, active: true, ..Default::default() }; 4];
        let d = distribution_divergence(&other, &base).unwrap();
        assert_eq!(d.get("ssa"), Some(1.0));
        assert_eq!(d.get("active"), Some(1.0));

        // p = (2, 1, 1, 0, ...)/4 over csa/tpa/msr, q = (1, 0, 0, 3)/4 over csa/tpa/msr/psr.
        let a: Vec<Configuration> = [SsaMethod::Csa, SsaMethod::Csa, SsaMethod::Tpa, SsaMethod::Msr]
            .into_iter()
            .map(|ssa| Configuration { ssa, ..Default::default() })
            .collect();
        let b: Vec<Configuration> = [SsaMethod::Csa, SsaMethod::Psr, SsaMethod::Psr, SsaMethod::Psr]
            .into_iter()
            .map(|ssa| Configuration { ssa, ..Default::default() })
            .collect();
        let hand = 0.5 * ((0.5f64 - 0.25).abs() + 0.25 + 0.25 + 0.75);
        assert!((distribution_divergence(&a, &b).unwrap().get("ssa").unwrap() - hand).abs() < 1e-15);
    }

    fn trace(points: &[(u64, f64)], budget: u64) -> RunTrace {
        RunTrace { improvements: points.to_vec(), budget, meta: TraceMeta::default() }
    }

    #[test]
    fn ert_examples() {
        let all: Vec<RunTrace> = (0..25).map(|_| trace(&[(100, 1e-9)], 1000)).collect();
        assert_eq!(ert(&all, 1e-8), Some(100.0));
        let mut half: Vec<RunTrace> = (0..10).map(|_| trace(&[(1000, 1e-9)], 1000)).collect();
        half.extend((0..10).map(|_| trace(&[(5, 1.0)], 1000)));
        assert_eq!(ert(&half, 1e-8), Some(2000.0));
        assert_eq!(ert(&half[10..], 1e-8), None);
    }

    #[test]
    fn ecdf_export_uses_shared_kernel() {
        let traces = vec![trace(&[(1, 50.0), (40, 1e-3), (900, 1e-9)], 1000), trace(&[(3, 1.0)], 1000)];
        let targets = default_targets();
        let ex = export_ecdf_ert(&traces, &targets).unwrap();
        assert_eq!(ex.ert.len(), 51);
        assert_eq!(ex.ecdf.first().unwrap().0, 1);
        assert_eq!(ex.ecdf.last().unwrap().0, 1000);
        for (t, f) in &ex.ecdf {
            assert_eq!(*f, ecdf(&traces, &targets, *t).unwrap());
        }
    }

    #[test]
    fn initial_race_relative_sign() {
        let log = vec![
            LogRow { iteration: 1, config_id: 0, seed: 1, aoc: 100.0 },
            LogRow { iteration: 1, config_id: 1, seed: 1, aoc: 80.0 },
            LogRow { iteration: 1, config_id: 2, seed: 1, aoc: 150.0 },
            LogRow { iteration: 2, config_id: 3, seed: 1, aoc: 1.0 },
        ];
        let r = initial_race_relative(&log, 0).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0].1.unwrap() - 0.2).abs() < 1e-12);
        assert!((r[1].1.unwrap() + 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn deltas_bounded(picks_a in prop::collection::vec((0usize..7, any::<bool>()), 1..20),
                          picks_b in prop::collection::vec((0usize..7, any::<bool>()), 1..20)) {
            let mk = |p: &Vec<(usize, bool)>| -> Vec<Configuration> {
                p.iter().map(|&(s, act)| {
                    let mut c = Configuration { active: act, ..Default::default() };
                    c.set_option("ssa", module_options("ssa").unwrap()[s]).unwrap();
                    c
                }).collect()
            };
            let d = distribution_divergence(&mk(&picks_a), &mk(&picks_b)).unwrap();
            for (m, v) in &d.deltas {
                if module_options(m).unwrap().len() == 2 {
                    prop_assert!((-1.0..=1.0).contains(v));
                } else {
                    prop_assert!((0.0..=1.0 + 1e-12).contains(v));
                }
            }
        }
    }
}
