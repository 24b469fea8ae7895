//! Monte-Carlo policy evaluation.

use rayon::prelude::*;

use super::stats::ReturnStats;
use crate::error::Result;
use crate::exec::{ExecMode, ExecutablePolicy};
use crate::mdp::{run_episode, ActionSource, Environment, Outcome, Trajectory};
use crate::rng::RngStream;

/// Runs `episodes` episodes in parallel. Episode `i` gets its own action
/// source from `make(i)` and simulates on `rng.fork("env").fork(i)`, so the
/// result does not depend on the worker count.
pub fn evaluate_with<A, F>(env: &dyn Environment, episodes: usize, rng: &RngStream, make: F) -> Result<ReturnStats>
where
    A: ActionSource,
    F: Fn(u64) -> A + Sync,
{
    let runs: Vec<(f64, Outcome)> = (0..episodes as u64)
        .into_par_iter()
        .map(|i| {
            let mut act = make(i);
            let t = run_episode(env, &mut act, &mut rng.fork("env").fork(i))?;
            Ok((t.total_return, t.outcome))
        })
        .collect::<Result<_>>()?;
    finish(env, runs)
}

fn finish(env: &dyn Environment, runs: Vec<(f64, Outcome)>) -> Result<ReturnStats> {
    let (returns, outcomes): (Vec<f64>, Vec<Outcome>) = runs.into_iter().unzip();
    ReturnStats::from_episodes(&returns, &outcomes, env.outcome_labels())
}

/// Evaluates an executable policy over `episodes` independent episodes.
///
/// Each episode starts from a copy of `policy` positioned on
/// `rng.fork("policy").fork(i)`. A persistent deterministic draw instead
/// carries its memo through all episodes in order, realizing one policy
/// sample for the whole batch.
pub fn mc_evaluate(
    env: &dyn Environment,
    policy: &ExecutablePolicy,
    episodes: usize,
    rng: &RngStream,
) -> Result<ReturnStats> {
    if policy.is_persistent() && policy.mode() == ExecMode::DeterministicDraw {
        let mut p = policy.clone();
        let mut runs = Vec::with_capacity(episodes);
        for i in 0..episodes as u64 {
            p.start_episode(rng.fork("policy").fork(i));
            let t = run_episode(env, &mut p, &mut rng.fork("env").fork(i))?;
            runs.push((t.total_return, t.outcome));
        }
        return finish(env, runs);
    }
    evaluate_with(env, episodes, rng, |i| {
        let mut p = policy.clone();
        p.start_episode(rng.fork("policy").fork(i));
        p
    })
}

/// The trajectories [`mc_evaluate`] would simulate for the same arguments.
pub fn collect_trajectories(
    env: &dyn Environment,
    policy: &ExecutablePolicy,
    episodes: usize,
    rng: &RngStream,
) -> Result<Vec<Trajectory>> {
    if policy.is_persistent() && policy.mode() == ExecMode::DeterministicDraw {
        let mut p = policy.clone();
        return (0..episodes as u64)
            .map(|i| {
                p.start_episode(rng.fork("policy").fork(i));
                run_episode(env, &mut p, &mut rng.fork("env").fork(i))
            })
            .collect();
    }
    (0..episodes as u64)
        .into_par_iter()
        .map(|i| {
            let mut p = policy.clone();
            p.start_episode(rng.fork("policy").fork(i));
            run_episode(env, &mut p, &mut rng.fork("env").fork(i))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::env::{fixtures, FixtureKind};
    use crate::policy::Proposal;

    #[test]
    fn chain_return_is_exact() {
        let env = fixtures::build(&FixtureKind::Chain).unwrap();
        let p = ExecutablePolicy::new(Arc::new(Proposal::tabular(1)), ExecMode::PosteriorPredictive, RngStream::new(0));
        let s = mc_evaluate(&env, &p, 500, &RngStream::new(1)).unwrap();
        assert!((s.mean - 1.5).abs() < 1e-12);
        assert_eq!(s.std_err, 0.0);
    }

    #[test]
    fn evaluation_is_seed_deterministic() {
        let env = fixtures::build(&FixtureKind::StochasticLoop).unwrap();
        let p = ExecutablePolicy::new(Arc::new(Proposal::tabular(2)), ExecMode::DeterministicDraw, RngStream::new(0));
        let a = mc_evaluate(&env, &p, 300, &RngStream::new(5)).unwrap();
        let b = mc_evaluate(&env, &p, 300, &RngStream::new(5)).unwrap();
        assert_eq!(a, b);
        let c = mc_evaluate(&env, &p.clone().persistent(true), 300, &RngStream::new(5)).unwrap();
        let d = mc_evaluate(&env, &p.persistent(true), 300, &RngStream::new(5)).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn uniform_bandit_mean() {
        let env = fixtures::build(&FixtureKind::bandit()).unwrap();
        let p = ExecutablePolicy::new(Arc::new(Proposal::tabular(2)), ExecMode::PosteriorPredictive, RngStream::new(0));
        let s = mc_evaluate(&env, &p, 20_000, &RngStream::new(2)).unwrap();
        assert!((s.mean - 0.5).abs() < 4.0 * s.std_err);
        let t = collect_trajectories(&env, &p, 20_000, &RngStream::new(2)).unwrap();
        let mut r: Vec<f64> = t.iter().map(|t| t.total_return).collect();
        r.sort_by(f64::total_cmp);
        assert_eq!(r, s.returns);
    }
}
