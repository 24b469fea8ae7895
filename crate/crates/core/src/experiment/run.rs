//! Training and evaluating the runs of one experiment.
//!
//! Run `r` lives in `<out>/run_<r>` (two digits) and draws every random
//! number below `RngStream::new(seed).fork("run").fork(r)`: `init` for the
//! perceptron weights, `train` for the sweeps and `eval` for evaluation.

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use super::config::{ExperimentConfig, PolicyKind};
use crate::engine::{train, TrainingLog};
use crate::engine::train::LOG_HEADER;
use crate::error::{Error, Result};
use crate::eval::{mc_evaluate, ReturnStats};
use crate::exec::{ExecMode, ExecutablePolicy};
use crate::mdp::Environment;
use crate::policy::{Adam, Checkpoint, CosineSchedule, Proposal};
use crate::rng::RngStream;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LOG_FILE: &str = "training_log.csv";
/// Environment variable holding the number of parallel worker slots.
pub const WORKERS_ENV: &str = "VSMC_WORKERS";

pub fn run_dir(out: &Path, run: usize) -> PathBuf {
    out.join(format!("run_{run:02}"))
}

pub fn run_rng(seed: u64, run: usize) -> RngStream {
    RngStream::new(seed).fork("run").fork(run)
}

/// Runs `f` on a pool with `VSMC_WORKERS` threads (rayon's default when
/// unset).
pub fn with_workers<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Usage(format!("{WORKERS_ENV}={v}: expected a positive integer")))?;
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Usage(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn initial_proposal(cfg: &ExperimentConfig, env: &dyn Environment, rng: &RngStream) -> Result<Proposal> {
    match cfg.policy.kind {
        PolicyKind::Tabular => Ok(Proposal::tabular(env.action_count())),
        PolicyKind::Perceptron => Proposal::perceptron(env, cfg.policy.hidden, &rng.fork("init")),
    }
}

/// Loads a checkpoint and checks it belongs to `env`.
pub fn load_checkpoint(path: &Path, env: &dyn Environment) -> Result<Checkpoint> {
    let ck = Checkpoint::load(path)?;
    if ck.env_id != env.id() {
        return Err(Error::EnvMismatch {
            expected: env.id(),
            found: ck.env_id,
        });
    }
    if ck.proposal.action_count() != env.action_count() {
        return Err(Error::Checkpoint(format!(
            "{}: {} actions, environment has {}",
            path.display(),
            ck.proposal.action_count(),
            env.action_count()
        )));
    }
    Ok(ck)
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub run: usize,
    pub checkpoint: Checkpoint,
    /// Records produced by this invocation (empty when already complete).
    pub log: TrainingLog,
}

/// Trains run `run`, resuming from its checkpoint when one exists.
pub fn train_run(cfg: &ExperimentConfig, env: &dyn Environment, out: &Path, run: usize) -> Result<RunOutcome> {
    let dir = run_dir(out, run);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let ck_path = dir.join(CHECKPOINT_FILE);
    let log_path = dir.join(LOG_FILE);
    let rng = run_rng(cfg.seed, run);
    let (mut proposal, mut opt, resumed) = if ck_path.exists() {
        let ck = load_checkpoint(&ck_path, env)?;
        let opt = ck
            .optimizer
            .ok_or_else(|| Error::Checkpoint(format!("{}: no optimizer state to resume from", ck_path.display())))?;
        (ck.proposal, opt, true)
    } else {
        let p = initial_proposal(cfg, env, &rng)?;
        let opt = Adam::new(CosineSchedule::new(cfg.train.base_lr, cfg.train.iterations), &p);
        (p, opt, false)
    };
    let mut log_file = OpenOptions::new()
        .create(true)
        .append(resumed)
        .write(true)
        .truncate(!resumed)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;
    if !resumed || log_file.metadata().map(|m| m.len() == 0).unwrap_or(true) {
        writeln!(log_file, "{LOG_HEADER}").map_err(|e| Error::io(&log_path, e))?;
    }
    let snapshot = |p: &Proposal, opt: &Adam| Checkpoint {
        env_id: env.id(),
        iteration: opt.steps(),
        seed: cfg.seed,
        proposal: p.clone(),
        optimizer: Some(opt.clone()),
    };
    let train_rng = rng.fork("train");
    let total = cfg.train.iterations;
    let every = cfg.train.checkpoint_every;
    let mut log = TrainingLog::default();
    let mut failure: Option<Error> = None;
    while opt.steps() < total {
        let target = opt.steps().checked_div(every).map_or(total, |k| ((k + 1) * every).min(total));
        let chunk = train(env, &mut proposal, &cfg.variant, target, &mut opt, &train_rng, |rec, _| {
            if failure.is_none() {
                if let Err(e) = writeln!(log_file, "{}", rec.csv_row()) {
                    failure = Some(Error::io(&log_path, e));
                }
            }
        })?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        log.records.extend(chunk.records);
        if target < total {
            snapshot(&proposal, &opt).save(&dir.join(format!("checkpoint_{target:06}.bin")))?;
        }
    }
    let checkpoint = snapshot(&proposal, &opt);
    checkpoint.save(&ck_path)?;
    Ok(RunOutcome { run, checkpoint, log })
}

/// Trains all runs, one per worker slot.
pub fn train_runs(cfg: &ExperimentConfig, env: &dyn Environment, out: &Path, runs: usize) -> Result<Vec<RunOutcome>> {
    with_workers(|| {
        (0..runs)
            .into_par_iter()
            .map(|r| train_run(cfg, env, out, r))
            .collect::<Result<Vec<_>>>()
    })?
}

/// Indices of `run_XX` directories under `out` holding a checkpoint.
pub fn trained_runs(out: &Path) -> Result<Vec<usize>> {
    let entries = fs::read_dir(out).map_err(|e| Error::io(out, e))?;
    let mut runs: Vec<usize> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let r: usize = name.strip_prefix("run_")?.parse().ok()?;
            e.path().join(CHECKPOINT_FILE).exists().then_some(r)
        })
        .collect();
    runs.sort_unstable();
    if runs.is_empty() {
        return Err(Error::Usage(format!("{}: no trained runs found", out.display())));
    }
    Ok(runs)
}

/// Evaluates one trained proposal on its run's evaluation stream.
pub fn evaluate_run(
    cfg: &ExperimentConfig,
    env: &dyn Environment,
    proposal: Proposal,
    run: usize,
    mode: ExecMode,
    episodes: usize,
) -> Result<ReturnStats> {
    let rng = run_rng(cfg.seed, run).fork("eval");
    let policy = ExecutablePolicy::new(Arc::new(proposal), mode, rng.fork("policy")).persistent(cfg.eval.persistent);
    mc_evaluate(env, &policy, episodes, &rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::{EnvKind, EnvSection};

    fn bandit_cfg() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(EnvSection {
            kind: EnvKind::Fixture,
            layout: None,
            file: None,
            instance: None,
            fixture: Some("bandit".into()),
            p_succ: None,
            horizon: None,
        });
        c.policy.kind = PolicyKind::Tabular;
        c.train.iterations = 40;
        c.train.base_lr = 0.01;
        c
    }

    #[test]
    fn rerun_gives_identical_checkpoint_and_resume_matches() {
        let cfg = bandit_cfg();
        let env = cfg.env_spec().unwrap().build().unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        train_run(&cfg, env.as_ref(), a.path(), 0).unwrap();
        train_run(&cfg, env.as_ref(), b.path(), 0).unwrap();
        let read = |d: &Path| fs::read(run_dir(d, 0).join(CHECKPOINT_FILE)).unwrap();
        assert_eq!(read(a.path()), read(b.path()));

        let c = tempfile::tempdir().unwrap();
        // same schedule length, fewer steps: the optimizer plans for 40
        let p = Proposal::tabular(2);
        let mut opt = Adam::new(CosineSchedule::new(cfg.train.base_lr, cfg.train.iterations), &p);
        let mut q = p.clone();
        train(env.as_ref(), &mut q, &cfg.variant, 15, &mut opt, &run_rng(cfg.seed, 0).fork("train"), |_, _| {}).unwrap();
        fs::create_dir_all(run_dir(c.path(), 0)).unwrap();
        Checkpoint {
            env_id: env.id(),
            iteration: 15,
            seed: cfg.seed,
            proposal: q,
            optimizer: Some(opt),
        }
        .save(&run_dir(c.path(), 0).join(CHECKPOINT_FILE))
        .unwrap();
        let resumed = train_run(&cfg, env.as_ref(), c.path(), 0).unwrap();
        assert_eq!(resumed.log.records.len(), 25);
        assert_eq!(read(c.path()), read(a.path()));
    }

    #[test]
    fn mismatched_checkpoint_is_rejected() {
        let cfg = bandit_cfg();
        let env = cfg.env_spec().unwrap().build().unwrap();
        let d = tempfile::tempdir().unwrap();
        train_run(&cfg, env.as_ref(), d.path(), 0).unwrap();
        let other = crate::env::make_fixture(&"tree".parse().unwrap()).unwrap();
        let e = load_checkpoint(&run_dir(d.path(), 0).join(CHECKPOINT_FILE), other.as_ref()).unwrap_err();
        assert!(matches!(e, Error::EnvMismatch { .. }));
        assert!(e.is_usage());
    }

    #[test]
    fn trained_runs_lists_checkpointed_dirs() {
        let cfg = bandit_cfg();
        let env = cfg.env_spec().unwrap().build().unwrap();
        let d = tempfile::tempdir().unwrap();
        train_runs(&cfg, env.as_ref(), d.path(), 3).unwrap();
        fs::create_dir_all(d.path().join("run_07")).unwrap();
        assert_eq!(trained_runs(d.path()).unwrap(), vec![0, 1, 2]);
    }
}
