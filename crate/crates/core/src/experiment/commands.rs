//! The `vsmc` subcommands. Each returns the text report printed to stdout
//! and writes its artifacts under the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::artifacts::{CcdfPlot, GridMap};
use super::config::ExperimentConfig;
use super::run::{evaluate_run, load_checkpoint, run_dir, run_rng, train_runs, trained_runs, with_workers, CHECKPOINT_FILE};
use crate::env::{EnvSpec, GridWorld};
use crate::error::{Error, Result};
use crate::eval::{brute_force_evidence, collect_trajectories, compare_runs, evaluate_with, solve_finite_horizon, ReturnStats};
use crate::exec::{ExecMode, ExecutablePolicy};
use crate::mdp::{EnvHandle, Environment};
use crate::policy::Proposal;
use crate::rng::RngStream;

/// Command-line overrides shared by the subcommands.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub runs: Option<usize>,
    pub mode: Option<ExecMode>,
    pub episodes: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        if let Some(r) = self.runs {
            cfg.train.runs = r;
        }
        if let Some(m) = self.mode {
            cfg.eval.mode = m;
        }
        if let Some(e) = self.episodes {
            cfg.eval.episodes = e;
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn build_env(cfg: &ExperimentConfig) -> Result<(EnvSpec, EnvHandle)> {
    let spec = cfg.env_spec()?;
    let env = spec.build()?;
    Ok((spec, env))
}

/// Metric names and the column headers they are reported under. Domains
/// with a loss/draw/win reading of their outcomes get exactly those
/// columns after the expected return.
fn columns(env: &dyn Environment) -> Vec<(String, String)> {
    let mut cols = vec![("expected return".to_string(), "expected return".to_string())];
    match env.loss_draw_win() {
        Some(ldw) => {
            for (label, header) in ldw.iter().zip(["loss", "draw", "win"]) {
                cols.push((label.to_string(), header.to_string()));
            }
        }
        None => {
            for m in ["0.05 quantile", "0.05 tail mean", "0.95 quantile", "0.95 tail mean"] {
                cols.push((m.to_string(), m.to_string()));
            }
            for l in env.outcome_labels() {
                cols.push((l.to_string(), l.to_string()));
            }
        }
    }
    cols
}

/// The stats table of one or more runs, `mean ± std` over runs.
pub fn stats_table(env: &dyn Environment, row: &str, stats: &[ReturnStats]) -> Result<String> {
    let cols = columns(env);
    let mut out = String::new();
    if stats.len() == 1 {
        let m = stats[0].metrics();
        let cells: Vec<(String, String)> = cols
            .iter()
            .map(|(k, h)| {
                let v = m.iter().find(|(n, _)| n == k).map_or(f64::NAN, |p| p.1);
                (h.clone(), format!("{v:.2}"))
            })
            .collect();
        let _ = writeln!(out, "{}", render(row, &cells));
        return Ok(out);
    }
    let summary = compare_runs(stats)?;
    let cells: Vec<(String, String)> = cols
        .iter()
        .filter_map(|(k, h)| summary.get(k).map(|m| (h.clone(), format!("{:.2} ± {:.2}", m.mean, m.std))))
        .collect();
    let _ = writeln!(out, "{}", render(row, &cells));
    Ok(out)
}

fn render(row: &str, cells: &[(String, String)]) -> String {
    let lw = row.chars().count().max(6);
    let widths: Vec<usize> = cells
        .iter()
        .map(|(h, c)| h.chars().count().max(c.chars().count()))
        .collect();
    let mut head = format!("{:lw$}", "");
    let mut body = format!("{row:lw$}");
    for ((h, c), w) in cells.iter().zip(&widths) {
        let _ = write!(head, " | {h:>w$}");
        let _ = write!(body, " | {c:>w$}");
    }
    format!("{head}\n{body}")
}

pub fn cmd_train(mut cfg: ExperimentConfig, o: &Overrides) -> Result<String> {
    o.apply(&mut cfg);
    cfg.validate()?;
    let (_, env) = build_env(&cfg)?;
    let out = cfg.output.dir.clone();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write(&out.join("config.toml"), &cfg.to_toml())?;
    let runs = train_runs(&cfg, env.as_ref(), &out, cfg.train.runs)?;
    let mut report = format!(
        "environment {}\nvariant {:?}\n{} runs x {} iterations\n",
        env.id(),
        cfg.variant,
        cfg.train.runs,
        cfg.train.iterations
    );
    for r in &runs {
        let tail = r.log.recent_log_z(100);
        let _ = writeln!(
            report,
            "run {:02}: iteration {}, mean logZ over last 100 sweeps {}",
            r.run,
            r.checkpoint.iteration,
            if r.log.records.is_empty() { "n/a".to_string() } else { format!("{tail:.4}") }
        );
    }
    Ok(report)
}

/// Evaluates every trained run under the output directory.
pub fn evaluate_runs(cfg: &ExperimentConfig, env: &dyn Environment) -> Result<Vec<(usize, ReturnStats)>> {
    let out = &cfg.output.dir;
    trained_runs(out)?
        .into_iter()
        .map(|r| {
            let ck = load_checkpoint(&run_dir(out, r).join(CHECKPOINT_FILE), env)?;
            let stats = with_workers(|| evaluate_run(cfg, env, ck.proposal, r, cfg.eval.mode, cfg.eval.episodes))??;
            Ok((r, stats))
        })
        .collect()
}

pub fn cmd_eval(mut cfg: ExperimentConfig, o: &Overrides) -> Result<String> {
    o.apply(&mut cfg);
    cfg.validate()?;
    let (_, env) = build_env(&cfg)?;
    let out = cfg.output.dir.clone();
    let mode = cfg.eval.mode;
    let results = evaluate_runs(&cfg, env.as_ref())?;
    let mut per_run = String::from("run");
    for (k, _) in results[0].1.metrics() {
        let _ = write!(per_run, ",{k}");
    }
    per_run.push('\n');
    for (r, s) in &results {
        let dir = run_dir(&out, *r);
        write(&dir.join(format!("eval_{mode}.csv")), &s.to_csv())?;
        write(&dir.join(format!("returns_{mode}.csv")), &s.returns_csv())?;
        let _ = write!(per_run, "{r}");
        for (_, v) in s.metrics() {
            let _ = write!(per_run, ",{v}");
        }
        per_run.push('\n');
    }
    write(&out.join(format!("eval_{mode}.csv")), &per_run)?;
    let stats: Vec<ReturnStats> = results.into_iter().map(|(_, s)| s).collect();
    let mut report = format!(
        "{} runs, {} episodes each, {} mode\n",
        stats.len(),
        cfg.eval.episodes,
        mode
    );
    report.push_str(&stats_table(env.as_ref(), "VSMC", &stats)?);
    write(&out.join(format!("eval_{mode}.txt")), &report)?;
    Ok(report)
}

pub fn cmd_oracle(mut cfg: ExperimentConfig, o: &Overrides) -> Result<String> {
    o.apply(&mut cfg);
    let (_, env) = build_env(&cfg)?;
    let sol = solve_finite_horizon(env.as_ref())?;
    let rng = RngStream::new(cfg.seed).fork("oracle");
    let stats = with_workers(|| evaluate_with(env.as_ref(), cfg.eval.episodes, &rng, |_| sol.actor()))??;
    let mut report = format!(
        "environment {}\n{} states, {} actions left at the start\nexact optimal expected return {:.6}\n{} Monte-Carlo episodes:\n",
        env.id(),
        sol.model.len(),
        sol.actions_left(),
        sol.value,
        cfg.eval.episodes
    );
    report.push_str(&stats_table(env.as_ref(), "optimal", std::slice::from_ref(&stats))?);
    let _ = writeln!(report, "std err {:.5}", stats.std_err);
    let out = cfg.output.dir.clone();
    write(&out.join("oracle.txt"), &report)?;
    write(&out.join("oracle.csv"), &stats.to_csv())?;
    Ok(report)
}

pub fn cmd_bruteforce(mut cfg: ExperimentConfig, o: &Overrides, checkpoint: Option<&Path>) -> Result<String> {
    o.apply(&mut cfg);
    let (_, env) = build_env(&cfg)?;
    let (proposal, label) = match checkpoint {
        Some(p) => (load_checkpoint(p, env.as_ref())?.proposal, p.display().to_string()),
        None => (Proposal::tabular(env.action_count()), "uniform proposal".to_string()),
    };
    let bf = brute_force_evidence(env.as_ref(), &proposal, cfg.variant.temperature)?;
    let mut report = format!(
        "environment {}\nZ = {:.6} (log {:.6})\nE[Z_hat] under {label} at temperature {} = {:.6}\n{} policies\n",
        env.id(),
        bf.z(),
        bf.log_z,
        cfg.variant.temperature,
        bf.z_sweep(),
        bf.policies.len()
    );
    let mut ranked: Vec<_> = bf.policies.iter().collect();
    ranked.sort_by(|a, b| b.posterior.total_cmp(&a.posterior));
    report.push_str("posterior, expected return, actions\n");
    for p in ranked.iter().take(20) {
        let acts: Vec<String> = p
            .actions
            .iter()
            .map(|(s, a)| format!("{}:{a}", env.describe(s)))
            .collect();
        let _ = writeln!(report, "{:.6}, {:.4}, {}", p.posterior, p.expected_return, acts.join(" "));
    }
    report.push_str("state, posterior marginal, q\n");
    for (s, m) in &bf.marginals {
        let q = proposal.action_probs(s)?;
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(report, "{}, {}, {}", env.describe(s), fmt(m), fmt(&q));
    }
    let _ = writeln!(report, "max total variation {:.4}", bf.max_tv(&proposal)?);
    Ok(report)
}

pub fn cmd_map(mut cfg: ExperimentConfig, o: &Overrides) -> Result<String> {
    o.apply(&mut cfg);
    let (spec, env) = build_env(&cfg)?;
    let EnvSpec::GridWorld(gspec) = spec else {
        return Err(Error::Usage(format!("map needs a grid world, not {}", env.id())));
    };
    let world = GridWorld::new(gspec.clone())?;
    let out = cfg.output.dir.clone();
    let mut maps = Vec::new();
    for r in trained_runs(&out)? {
        let ck = load_checkpoint(&run_dir(&out, r).join(CHECKPOINT_FILE), &world)?;
        let rng = run_rng(cfg.seed, r).fork("eval");
        let policy = ExecutablePolicy::new(Arc::new(ck.proposal.clone()), cfg.eval.mode, rng.fork("policy"))
            .persistent(cfg.eval.persistent);
        let traj = with_workers(|| collect_trajectories(&world, &policy, cfg.eval.episodes, &rng))??;
        let map = GridMap::from_run(&gspec, &ck.proposal, &traj)?;
        let dir = run_dir(&out, r);
        write(&dir.join("map.csv"), &map.to_csv())?;
        write(&dir.join("map.svg"), &map.to_svg())?;
        maps.push(map);
    }
    let mean = GridMap::mean(&maps)?;
    write(&out.join("map.csv"), &mean.to_csv())?;
    write(&out.join("map.svg"), &mean.to_svg())?;
    let (sx, sy) = gspec.start;
    let p = mean.probs[sy * gspec.width + sx];
    Ok(format!(
        "{} runs; start ({sx}, {sy}) q = right {:.3} up {:.3} down {:.3} left {:.3}\nwrote {}\n",
        maps.len(),
        p[0],
        p[1],
        p[2],
        p[3],
        out.join("map.svg").display()
    ))
}

/// Reads a `return` column file written by `eval`.
pub fn read_returns(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut v = text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| Error::Usage(format!("{}: `{l}`: {e}", path.display())))
        })
        .collect::<Result<Vec<f64>>>()?;
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `series` pairs a label with the returns files of its runs. Writes
/// `<prefix>.svg` and `<prefix>.csv`.
pub fn cmd_ccdf(series: &[(String, Vec<PathBuf>)], prefix: &Path) -> Result<String> {
    if series.is_empty() {
        return Err(Error::Usage("ccdf needs at least one series".into()));
    }
    let plot = CcdfPlot {
        series: series
            .iter()
            .map(|(name, files)| Ok((name.clone(), files.iter().map(|f| read_returns(f)).collect::<Result<_>>()?)))
            .collect::<Result<_>>()?,
    };
    let svg = prefix.with_extension("svg");
    let csv = prefix.with_extension("csv");
    write(&svg, &plot.to_svg())?;
    write(&csv, &plot.to_csv())?;
    Ok(format!("wrote {} and {}\n", svg.display(), csv.display()))
}
