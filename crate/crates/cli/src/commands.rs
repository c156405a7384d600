use std::fs;
use std::path::{Path, PathBuf};

use modcma_core::metrics::{aoc, default_targets, RunTrace};
use modcma_core::report::{self, SingleModuleScore, SCORES_HEADER};
use modcma_core::rng::{mix_seed, stream};
use modcma_core::tuner::{
    build_space, elites_from_json, elites_to_json, iterated_race, read_log, verify, write_log, Elite,
    ProblemEvaluator, EVALS_PER_DIM,
};
use modcma_core::{run, Configuration, FunctionId, ProblemInstance};
use rayon::prelude::*;

use crate::exit::{read_input, CliError};
use crate::manifest::ExperimentManifest;

type CliResult<T = ()> = Result<T, CliError>;

fn write(path: &Path, contents: &str) -> CliResult {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// A configuration given inline as JSON or as `@path`.
pub fn load_config(arg: &str) -> CliResult<Configuration> {
    let text = match arg.strip_prefix('@') {
        Some(path) => read_input(Path::new(path))?,
        None => arg.to_string(),
    };
    Ok(Configuration::from_json(&text)?)
}

pub struct RunArgs {
    pub function: String,
    pub dim: usize,
    pub iid: u64,
    pub config: String,
    pub budget: u64,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn cmd_run(a: &RunArgs) -> CliResult<String> {
    let cfg = load_config(&a.config)?;
    let fid: FunctionId = a.function.parse()?;
    let mut problem = ProblemInstance::new(fid, a.dim, a.iid)?;
    let outcome = run(&cfg, &mut problem, a.budget, a.seed)?;
    let mut csv = Vec::new();
    outcome.trace.write_csv(&mut csv)?;
    let name = format!("{}_d{}_i{}_s{}.csv", fid.name(), a.dim, a.iid, a.seed);
    write(&a.out.join(name), std::str::from_utf8(&csv).expect("ascii"))?;
    let score = aoc(std::slice::from_ref(&outcome.trace), &default_targets(), a.budget)?;
    Ok(format!(
        "{}\n{}\n",
        modcma_core::metrics::SCORE_HEADER,
        modcma_core::metrics::score_row(&cfg.label(), fid.name(), a.iid, &score)
    ))
}

pub struct SingleModuleArgs {
    pub dim: usize,
    pub budget: u64,
    pub runs: u64,
    pub functions: Vec<String>,
    pub new_ssa: bool,
    pub new_bounds: bool,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn cmd_single_module(a: &SingleModuleArgs) -> CliResult<String> {
    let fids: Vec<FunctionId> = if a.functions.is_empty() {
        FunctionId::ALL.to_vec()
    } else {
        a.functions.iter().map(|f| f.parse()).collect::<Result<_, _>>()?
    };
    let variants = report::single_module_variants(a.new_ssa, a.new_bounds);
    let jobs: Vec<(usize, usize, u64)> = (0..fids.len())
        .flat_map(|f| (0..variants.len()).flat_map(move |v| (0..a.runs).map(move |r| (f, v, r))))
        .collect();
    let traces: Vec<RunTrace> = jobs
        .par_iter()
        .map(|&(f, v, r)| {
            let mut p = ProblemInstance::new(fids[f], a.dim, 1)?;
            Ok(run(&variants[v].1, &mut p, a.budget, a.seed + r)?.trace)
        })
        .collect::<Result<_, CliError>>()?;
    let targets = default_targets();
    let mut scores = Vec::new();
    let mut csv = format!("{SCORES_HEADER}\n");
    for (f, fid) in fids.iter().enumerate() {
        for (v, (label, _)) in variants.iter().enumerate() {
            let start = (f * variants.len() + v) * a.runs as usize;
            let s = aoc(&traces[start..start + a.runs as usize], &targets, a.budget)?;
            csv += &format!("{},{label},{}\n", fid.name(), s.aoc);
            scores.push(SingleModuleScore { function: fid.name().into(), option: label.clone(), aoc: s.aoc });
        }
    }
    let vbs = report::vbs_csv(&report::vbs_single_module(&scores)?);
    write(&a.out.join("single_module_scores.csv"), &csv)?;
    write(&a.out.join("vbs.csv"), &vbs)?;
    Ok(vbs)
}

/// Files written by one tuner repetition.
pub fn repetition_paths(out: &Path, function: &str, rep: usize) -> (PathBuf, PathBuf) {
    let dir = out.join(function);
    (dir.join(format!("elites_rep{rep}.json")), dir.join(format!("runlog_rep{rep}.csv")))
}

pub fn cmd_tune(manifest_path: &Path, seed_override: Option<u64>) -> CliResult<String> {
    let manifest = ExperimentManifest::parse(&read_input(manifest_path)?)?;
    let seed = seed_override.unwrap_or(manifest.seed);
    let space = build_space(&[manifest.extension], manifest.dim)?;
    let out = manifest.out.join(&manifest.name);
    let mut summary = String::new();
    for (fi, fid) in manifest.function_ids()?.into_iter().enumerate() {
        let evaluator = ProblemEvaluator {
            budget: manifest.eval_budget(),
            ..ProblemEvaluator::new(fid, manifest.dim, manifest.iid)
        };
        for rep in 0..manifest.repetitions {
            let mut rng = stream(mix_seed(seed, fi as u64), rep as u64);
            let result = iterated_race(&space, &evaluator, manifest.tuner_budget, &mut rng)?;
            let (elites_path, log_path) = repetition_paths(&out, fid.name(), rep);
            write(&elites_path, &elites_to_json(&result.elites))?;
            let mut log = Vec::new();
            write_log(&result.log, &mut log)?;
            write(&log_path, std::str::from_utf8(&log).expect("ascii"))?;
            let best = &result.elites[0];
            summary += &format!("{},{rep},{},{}\n", fid.name(), best.tuner_aoc, best.config.label());
        }
    }
    Ok(format!("function,repetition,tuner_aoc,best\n{summary}"))
}

pub struct VerifyArgs {
    pub elites: PathBuf,
    pub function: String,
    pub dim: usize,
    pub iid: u64,
    pub budget: Option<u64>,
    pub runs: usize,
    pub seed_base: u64,
    pub out: PathBuf,
}

pub fn cmd_verify(a: &VerifyArgs) -> CliResult<String> {
    let elites = elites_from_json(&read_input(&a.elites)?)?;
    let fid: FunctionId = a.function.parse()?;
    let evaluator = ProblemEvaluator {
        budget: a.budget.unwrap_or(EVALS_PER_DIM * a.dim as u64),
        ..ProblemEvaluator::new(fid, a.dim, a.iid)
    };
    let verified = verify(&elites, &evaluator, a.runs, a.seed_base)?;
    let stem = a.elites.file_stem().and_then(|s| s.to_str()).unwrap_or("elites");
    write(&a.out.join(format!("{stem}_verified.json")), &elites_to_json(&verified))?;
    let mut table = String::from("rank,verified_aoc,tuner_aoc,config\n");
    for (i, e) in verified.iter().enumerate() {
        table += &format!("{i},{},{},{}\n", e.verified_mean().unwrap_or(f64::NAN), e.tuner_aoc, e.config.label());
    }
    Ok(table)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportKind {
    Activation,
    Improvement,
    Delta,
    Ecdf,
    Initial,
}

pub struct ReportArgs {
    pub kind: ReportKind,
    pub elites: Vec<String>,
    pub baseline: Vec<String>,
    pub extension: Vec<String>,
    pub traces: Vec<PathBuf>,
    pub runlog: Option<PathBuf>,
    pub budget: Option<u64>,
    pub label: String,
    pub out: PathBuf,
}

/// Splits `label=path`; a bare path gets `default_label`.
fn labelled<'a>(item: &'a str, default_label: &'a str) -> (&'a str, &'a Path) {
    match item.split_once('=') {
        Some((l, p)) => (l, Path::new(p)),
        None => (default_label, Path::new(item)),
    }
}

fn load_elites(items: &[String], default_label: &str) -> CliResult<Vec<(String, Vec<Elite>)>> {
    if items.is_empty() {
        return Err(CliError { code: crate::exit::MISSING_INPUT, message: "no elite files given".into() });
    }
    items
        .iter()
        .map(|i| {
            let (l, p) = labelled(i, default_label);
            Ok((l.to_string(), elites_from_json(&read_input(p)?)?))
        })
        .collect()
}

fn configs(sets: &[(String, Vec<Elite>)]) -> Vec<Configuration> {
    sets.iter().flat_map(|(_, es)| es.iter().map(|e| e.config.clone())).collect()
}

/// Best verified (or, failing that, tuner-phase) mean AOC per label.
fn best_per_label(sets: &[(String, Vec<Elite>)]) -> Vec<(String, f64)> {
    let mut best: Vec<(String, f64)> = Vec::new();
    for (label, es) in sets {
        for e in es {
            let v = e.verified_mean().unwrap_or(e.tuner_aoc);
            match best.iter_mut().find(|b| b.0 == *label) {
                Some(b) if v < b.1 => b.1 = v,
                Some(_) => {}
                None => best.push((label.clone(), v)),
            }
        }
    }
    best
}

pub fn cmd_report(a: &ReportArgs) -> CliResult<String> {
    let (file, body) = match a.kind {
        ReportKind::Activation => {
            let sets = load_elites(&a.elites, &a.label)?;
            let mut labels: Vec<&String> = Vec::new();
            for (l, _) in &sets {
                if !labels.contains(&l) {
                    labels.push(l);
                }
            }
            let mut csv = format!("{}\n", report::ACTIVATION_HEADER);
            for l in labels {
                let group: Vec<(String, Vec<Elite>)> = sets.iter().filter(|s| s.0 == *l).cloned().collect();
                for row in report::activation_counts(&configs(&group))?.csv_rows(l) {
                    csv += &row;
                    csv.push('\n');
                }
            }
            ("activation.csv", csv)
        }
        ReportKind::Improvement => {
            let base = best_per_label(&load_elites(&a.baseline, &a.label)?);
            let ext = best_per_label(&load_elites(&a.extension, &a.label)?);
            let rows: Vec<(String, Option<f64>)> = base
                .iter()
                .filter_map(|(l, b)| {
                    ext.iter().find(|e| e.0 == *l).map(|e| (l.clone(), report::relative_improvement(e.1, *b)))
                })
                .collect();
            ("improvement.csv", report::improvement_csv(&rows))
        }
        ReportKind::Delta => {
            let base = configs(&load_elites(&a.baseline, &a.label)?);
            let ext = configs(&load_elites(&a.extension, &a.label)?);
            ("delta.csv", report::distribution_divergence(&ext, &base)?.csv())
        }
        ReportKind::Ecdf => {
            if a.traces.is_empty() {
                return Err(CliError { code: crate::exit::MISSING_INPUT, message: "no trace files given".into() });
            }
            let budget = a.budget.ok_or_else(|| CliError::invalid("--budget is required for ecdf reports"))?;
            let traces = a
                .traces
                .iter()
                .map(|p| Ok(RunTrace::read_csv(read_input(p)?.as_bytes(), budget)?))
                .collect::<CliResult<Vec<_>>>()?;
            let ex = report::export_ecdf_ert(&traces, &default_targets())?;
            write(&a.out.join("ert.csv"), &ex.ert_csv())?;
            ("ecdf.csv", ex.ecdf_csv())
        }
        ReportKind::Initial => {
            let path = a
                .runlog
                .as_ref()
                .ok_or_else(|| CliError { code: crate::exit::MISSING_INPUT, message: "--runlog is required".into() })?;
            let rows = report::initial_race_relative(&read_log(&read_input(path)?)?, 0)?;
            ("initial.csv", report::initial_csv(&rows))
        }
    };
    write(&a.out.join(file), &body)?;
    Ok(body)
}
