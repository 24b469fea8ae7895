use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vsmc_policy::experiment::ExperimentConfig;
use vsmc_policy::policy::Checkpoint;
use vsmc_policy::State;

fn vsmc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vsmc"))
        .args(args)
        .current_dir(dir)
        .env("VSMC_WORKERS", "2")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const BANDIT: &str = r#"
seed = 3

[env]
kind = "fixture"
fixture = "bandit"

[policy]
kind = "tabular"

[variant]
preset = "vsmc"
baseline = "mean"

[train]
iterations = 10000
base_lr = 0.01
runs = 2

[eval]
episodes = 2000

[output]
dir = "out"
"#;

#[test]
fn bandit_train_recovers_the_posterior_and_replays() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("bandit.toml"), BANDIT).unwrap();
    let o = vsmc(&["train", "--config", "bandit.toml"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let ck = Checkpoint::load(&d.path().join("out/run_00/checkpoint.bin")).unwrap();
    let q = ck.proposal.action_probs(&State::new(vec![0])).unwrap();
    let target = 1f64.exp() / (1f64.exp() + 1.0);
    assert!((q[0] - target).abs() < 0.05, "q = {q:?}");
    assert_eq!(ck.iteration, 10_000);

    let log = fs::read_to_string(d.path().join("out/run_00/training_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 10_001);

    let first = fs::read(d.path().join("out/run_01/checkpoint.bin")).unwrap();
    let o = vsmc(&["train", "--config", "bandit.toml", "--out", "again"], d.path());
    assert!(o.status.success());
    assert_eq!(first, fs::read(d.path().join("again/run_01/checkpoint.bin")).unwrap());

    // an already complete run resumes to a no-op
    let o = vsmc(&["train", "--config", "bandit.toml"], d.path());
    assert!(o.status.success());
    assert_eq!(first, fs::read(d.path().join("out/run_01/checkpoint.bin")).unwrap());

    let o = vsmc(&["eval", "--config", "bandit.toml", "--mode", "argmax"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("1.00 ± 0.00"), "{}", stdout(&o));
    assert!(d.path().join("out/eval_argmax.csv").exists());
    let returns = fs::read_to_string(d.path().join("out/run_00/returns_argmax.csv")).unwrap();
    assert_eq!(returns.lines().next(), Some("return"));
    assert_eq!(returns.lines().count(), 2001);

    let o = vsmc(&["bruteforce", "--config", "bandit.toml", "--checkpoint", "out/run_00/checkpoint.bin"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("1.85914"), "{}", stdout(&o));
}

#[test]
fn saved_config_round_trips() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("bandit.toml"), BANDIT.replace("10000", "20")).unwrap();
    let o = vsmc(&["train", "--config", "bandit.toml", "--seed", "9", "--runs", "1"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let saved = fs::read_to_string(d.path().join("out/config.toml")).unwrap();
    let cfg = ExperimentConfig::parse(&saved).unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.train.runs, 1);
    assert_eq!(cfg.to_toml(), saved);
}

#[test]
fn usage_errors_exit_with_two() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    fs::write(p.join("missing.toml"), "[env]\nkind = \"gridworld\"\nfile = \"worlds/absent.grid\"\n").unwrap();
    let o = vsmc(&["train", "--config", "missing.toml"], p);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.grid"), "{}", stderr(&o));

    fs::write(p.join("bad.toml"), "[env]\nkind = \"blackjack\"\n[train]\nruns = 0\n").unwrap();
    let o = vsmc(&["train", "--config", "bad.toml"], p);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("train.runs"), "{}", stderr(&o));

    fs::write(p.join("typo.toml"), "[env]\nkind = \"blackjack\"\n[train]\niteration = 5\n").unwrap();
    let o = vsmc(&["train", "--config", "typo.toml"], p);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("iteration"), "{}", stderr(&o));

    let o = vsmc(&["eval", "--config", "bad.toml", "--mode", "greedy"], p);
    assert_eq!(o.status.code(), Some(2));
    let o = vsmc(&["launch"], p);
    assert_eq!(o.status.code(), Some(2));

    fs::write(p.join("bandit.toml"), BANDIT.replace("10000", "10")).unwrap();
    assert!(vsmc(&["train", "--config", "bandit.toml", "--runs", "1"], p).status.success());
    let o = vsmc(&["map", "--config", "bandit.toml"], p);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    // a checkpoint trained on another environment
    fs::write(p.join("tree.toml"), BANDIT.replace("\"bandit\"", "\"tree\"")).unwrap();
    let o = vsmc(&["eval", "--config", "tree.toml"], p);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("bandit"), "{}", stderr(&o));
}

#[test]
fn runtime_errors_exit_with_three() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("inf.toml"), BANDIT.replace("\"bandit\"", "\"bandit:inf\"")).unwrap();
    let o = vsmc(&["train", "--config", "inf.toml"], d.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("non-finite"));
}

const GRID: &str = r#"
seed = 1

[env]
kind = "gridworld"
layout = "shared_dynamics"

[policy]
kind = "tabular"

[train]
iterations = 200
base_lr = 0.01
runs = 2

[eval]
episodes = 500

[output]
dir = "grid"
"#;

#[test]
fn map_and_ccdf_artifacts_are_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    fs::write(p.join("grid.toml"), GRID).unwrap();
    assert!(vsmc(&["train", "--config", "grid.toml"], p).status.success());
    assert!(vsmc(&["eval", "--config", "grid.toml"], p).status.success());
    let o = vsmc(&["map", "--config", "grid.toml"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(p.join("grid/map.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,y,cell,visits,right,up,down,left"));
    assert_eq!(csv.lines().count(), 17);
    let svg = fs::read(p.join("grid/map.svg")).unwrap();
    assert!(p.join("grid/run_01/map.svg").exists());
    assert!(vsmc(&["map", "--config", "grid.toml"], p).status.success());
    assert_eq!(svg, fs::read(p.join("grid/map.svg")).unwrap());

    let o = vsmc(
        &["ccdf", "--out", "plot", "vsmc=grid/run_00/returns_predictive.csv,grid/run_01/returns_predictive.csv"],
        p,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(p.join("plot.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("series,return,mean,low,high"));
    assert!(fs::read_to_string(p.join("plot.svg")).unwrap().starts_with("<svg"));

    let o = vsmc(&["ccdf", "--out", "plot", "unlabelled.csv"], p);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn blackjack_oracle_report_has_the_table_columns() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("bj.toml"), "[env]\nkind = \"blackjack\"\n[eval]\nepisodes = 20000\n").unwrap();
    let o = vsmc(&["oracle", "--config", "bj.toml", "--out", "o"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("exact optimal expected return -0.0465"), "{out}");
    let header = out.lines().find(|l| l.contains("expected return |")).unwrap();
    let cols: Vec<&str> = header.split('|').skip(1).map(str::trim).collect();
    assert_eq!(cols, ["expected return", "loss", "draw", "win"]);
}
