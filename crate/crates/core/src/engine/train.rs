//! The training loop: sweep, assemble, backpropagate, step.

use std::fmt::Write as _;
use std::time::Instant;

use super::config::VariantConfig;
use super::gradient::assemble_gradient;
use super::sweep::sweep;
use crate::error::{Error, Result};
use crate::mdp::Environment;
use crate::policy::{Adam, Proposal};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRecord {
    pub iteration: u64,
    pub log_z: f64,
    pub temperature: f64,
    pub learning_rate: f64,
    pub mean_ess: f64,
    pub mean_return: f64,
    /// Seconds since the start of this call to [`train`].
    pub wall_time: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<TrainingRecord>,
}

pub const LOG_HEADER: &str = "iteration,logZ_hat,temperature,learning_rate,mean_ess,wall_time";

impl TrainingRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.3}",
            self.iteration, self.log_z, self.temperature, self.learning_rate, self.mean_ess, self.wall_time
        )
    }
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(LOG_HEADER);
        out.push('\n');
        for r in &self.records {
            writeln!(out, "{}", r.csv_row()).unwrap();
        }
        out
    }

    /// Mean evidence estimate over the last `n` records.
    pub fn recent_log_z(&self, n: usize) -> f64 {
        let tail = &self.records[self.records.len().saturating_sub(n)..];
        tail.iter().map(|r| r.log_z).sum::<f64>() / tail.len().max(1) as f64
    }
}

/// Trains `proposal` until the optimizer has taken `iterations` steps,
/// continuing from however many it has already taken.
///
/// Iteration `k` draws from `rng.fork("iter").fork(k)`, so a resumed run
/// repeats an uninterrupted one exactly. The temperature schedule spans the
/// optimizer's planned total.
pub fn train(
    env: &dyn Environment,
    proposal: &mut Proposal,
    cfg: &VariantConfig,
    iterations: u64,
    opt: &mut Adam,
    rng: &RngStream,
    mut on_iteration: impl FnMut(&TrainingRecord, &Proposal),
) -> Result<TrainingLog> {
    cfg.validate()?;
    let start = Instant::now();
    let total = opt.schedule.total_iters.max(iterations);
    let mut acc = proposal.new_accumulator();
    let mut log = TrainingLog::default();
    while opt.steps() < iterations {
        let k = opt.steps();
        let temperature = cfg.anneal.temperature(cfg.temperature, k, total);
        let sr = sweep(env, proposal, cfg, temperature, &rng.fork("iter").fork(k))?;
        let terms = assemble_gradient(&sr, cfg);
        proposal.backprop_weighted_logq(&terms, &mut acc)?;
        let learning_rate = opt.current_lr();
        opt.step(proposal, &mut acc)?;
        if !proposal.is_finite() {
            return Err(Error::NonFiniteParameters);
        }
        let record = TrainingRecord {
            iteration: k,
            log_z: sr.log_z,
            temperature,
            learning_rate,
            mean_ess: sr.mean_ess(),
            mean_return: sr.mean_return(),
            wall_time: start.elapsed().as_secs_f64(),
        };
        on_iteration(&record, proposal);
        log.records.push(record);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::config::{Anneal, Baseline};
    use crate::env::{fixtures, FixtureKind};
    use crate::mdp::State;
    use crate::policy::CosineSchedule;

    fn train_bandit(scale: f64, cfg: &VariantConfig, iters: u64, lr: f64, seed: u64) -> f64 {
        let env = fixtures::build(&FixtureKind::Bandit { scale }).unwrap();
        let mut p = Proposal::tabular(2);
        let mut opt = Adam::new(CosineSchedule::new(lr, iters), &p);
        train(&env, &mut p, cfg, iters, &mut opt, &RngStream::new(seed), |_, _| {}).unwrap();
        p.action_probs(&State::new(vec![0])).unwrap()[0]
    }

    fn vsmc_mean() -> VariantConfig {
        VariantConfig {
            baseline: Baseline::Mean,
            ..VariantConfig::vsmc()
        }
    }

    #[test]
    fn bandit_matches_boltzmann_posterior() {
        let q = train_bandit(1.0, &vsmc_mean(), 10_000, 0.01, 1);
        let exact = 1f64.exp() / (1f64.exp() + 1.0);
        assert!((q - exact).abs() < 0.05, "q {q} vs {exact}");
    }

    #[test]
    fn linear_annealing_concentrates() {
        let cfg = VariantConfig {
            anneal: Anneal::Linear,
            ..vsmc_mean()
        };
        let q = train_bandit(1.0, &cfg, 10_000, 0.01, 2);
        assert!(q > 0.99, "q {q}");
    }

    #[test]
    fn zero_reward_stays_uniform() {
        let q = train_bandit(0.0, &vsmc_mean(), 10_000, 0.01, 3);
        assert!((q - 0.5).abs() < 0.05, "q {q}");
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let env = fixtures::build(&FixtureKind::binary_tree()).unwrap();
        let cfg = VariantConfig::vsmc();
        let rng = RngStream::new(9);
        let mut a = Proposal::tabular(2);
        let mut opt_a = Adam::new(CosineSchedule::new(0.05, 200), &a);
        train(&env, &mut a, &cfg, 200, &mut opt_a, &rng, |_, _| {}).unwrap();

        let mut b = Proposal::tabular(2);
        let mut opt_b = Adam::new(CosineSchedule::new(0.05, 200), &b);
        train(&env, &mut b, &cfg, 120, &mut opt_b, &rng, |_, _| {}).unwrap();
        let log = train(&env, &mut b, &cfg, 200, &mut opt_b, &rng, |_, _| {}).unwrap();
        assert_eq!(log.records.first().unwrap().iteration, 120);
        assert_eq!(a, b);
    }

    #[test]
    fn log_csv_has_fixed_columns() {
        let env = fixtures::build(&FixtureKind::bandit()).unwrap();
        let mut p = Proposal::tabular(2);
        let mut opt = Adam::new(CosineSchedule::new(0.01, 3), &p);
        let log = train(&env, &mut p, &VariantConfig::vsmc(), 3, &mut opt, &RngStream::new(0), |_, _| {}).unwrap();
        let csv = log.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], LOG_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));
    }
}
