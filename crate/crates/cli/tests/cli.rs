use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn modcma(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modcma"))
        .args(args)
        .current_dir(dir)
        .env_remove("MODCMA_SEED")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_writes_trace_and_score() {
    let dir = tempfile::tempdir().unwrap();
    let o = modcma(dir.path(), &["run", "--function", "sphere", "--budget", "50000", "--seed", "3", "--out", "o"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.starts_with("config_id,fid,iid,n_runs,budget,aoc\n"));
    let trace = fs::read_to_string(dir.path().join("o/sphere_d5_i1_s3.csv")).unwrap();
    let last: f64 = trace.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(last <= 1e-8);
}

#[test]
fn malformed_config_exits_2_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    for config in ["{not json", r#"{"ssa":"bogus"}"#, r#"{"unknown":true}"#] {
        let o = modcma(dir.path(), &["run", "--function", "sphere", "--budget", "100", "--config", config, "--out", "o"]);
        assert_eq!(code(&o), 2, "{config}");
    }
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_function_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = modcma(dir.path(), &["run", "--function", "nope", "--budget", "100", "--out", "o"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn missing_inputs_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&modcma(dir.path(), &["tune", "--manifest", "absent.json"])), 4);
    let o = modcma(dir.path(), &["verify", "--elites", "absent.json", "--function", "sphere", "--out", "v"]);
    assert_eq!(code(&o), 4);
    assert_eq!(code(&modcma(dir.path(), &["report", "--kind", "initial", "--out", "r"])), 4);
    assert_eq!(code(&modcma(dir.path(), &["report", "--kind", "activation", "--out", "r"])), 4);
}

#[test]
fn config_from_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"ssa":"tpa","active":true}"#).unwrap();
    let args = ["run", "--function", "sphere", "--dim", "2", "--budget", "2000", "--config", "@c.json", "--out", "o"];
    assert_eq!(code(&modcma(dir.path(), &args)), 0);
}

#[test]
fn repeated_run_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["run", "--function", "rot_rastrigin", "--dim", "3", "--budget", "3000", "--seed", "9", "--out", "o"];
    let a = modcma(dir.path(), &args);
    let first = fs::read(dir.path().join("o/rot_rastrigin_d3_i1_s9.csv")).unwrap();
    let b = modcma(dir.path(), &args);
    let second = fs::read(dir.path().join("o/rot_rastrigin_d3_i1_s9.csv")).unwrap();
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(first, second);
}

#[test]
fn seed_env_overrides_flag_default() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_modcma"))
        .args(["run", "--function", "sphere", "--dim", "2", "--budget", "500", "--out", "o"])
        .current_dir(dir.path())
        .env("MODCMA_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("o/sphere_d2_i1_s42.csv").exists());
}

#[test]
fn tune_verify_report_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("m.json"),
        r#"{"name":"base","functions":["sphere"],"dim":2,"tuner_budget":60,"eval_budget":300,"repetitions":4,"out":"res"}"#,
    )
    .unwrap();
    let o = modcma(p, &["--jobs", "2", "tune", "--manifest", "m.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fdir = p.join("res/base/sphere");
    for rep in 0..4 {
        assert!(fdir.join(format!("elites_rep{rep}.json")).exists());
        assert!(fdir.join(format!("runlog_rep{rep}.csv")).exists());
    }
    let elite_files = fs::read_dir(&fdir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("elites_"))
        .count();
    assert_eq!(elite_files, 4);

    let before = fs::read(fdir.join("elites_rep0.json")).unwrap();
    let o = modcma(
        p,
        &["verify", "--elites", "res/base/sphere/elites_rep0.json", "--function", "sphere", "--dim", "2", "--budget", "300", "--out", "v"],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(fdir.join("elites_rep0.json")).unwrap(), before);
    let verified: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("v/elites_rep0_verified.json")).unwrap()).unwrap();
    for e in verified.as_array().unwrap() {
        assert_eq!(e["verified_aoc"].as_array().unwrap().len(), 25);
    }

    let e0 = "res/base/sphere/elites_rep0.json";
    let o = modcma(p, &["report", "--kind", "delta", "--baseline", e0, "--extension", e0, "--out", "r"]);
    assert_eq!(code(&o), 0);
    let delta = fs::read_to_string(p.join("r/delta.csv")).unwrap();
    for line in delta.lines().skip(1) {
        let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(v, 0.0, "{line}");
    }

    let o = modcma(p, &["report", "--kind", "initial", "--runlog", "res/base/sphere/runlog_rep0.csv", "--out", "r"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("config_id,relative_aoc\n"));
}

#[test]
fn single_module_has_one_row_per_function() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["single-module", "--dim", "2", "--budget", "200", "--runs", "2", "--functions", "sphere,sep_ellipsoid", "--out", "s"];
    let o = modcma(dir.path(), &["--jobs", "4"].iter().chain(args.iter()).copied().collect::<Vec<_>>());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let vbs = stdout(&o);
    assert_eq!(vbs.lines().count(), 3);
    let scores = fs::read_to_string(dir.path().join("s/single_module_scores.csv")).unwrap();
    assert_eq!(scores.lines().count(), 1 + 2 * 14);
}
