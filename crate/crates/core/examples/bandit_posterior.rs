//! Trains a tabular proposal on the two-armed bandit and compares it with
//! the exact policy posterior from enumeration.
//!
//! cargo run --release --example bandit_posterior [iterations]

use vsmc_policy::engine::{train, Baseline, VariantConfig};
use vsmc_policy::env::{fixtures, FixtureKind};
use vsmc_policy::eval::brute_force_evidence;
use vsmc_policy::mdp::Environment;
use vsmc_policy::policy::{Adam, CosineSchedule, Proposal};
use vsmc_policy::{Result, RngStream};

fn main() -> Result<()> {
    let iters: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10_000);
    let cfg = VariantConfig { baseline: Baseline::Mean, ..VariantConfig::vsmc() };
    for scale in [1.0, 2.0, 4.0] {
        let env = fixtures::build(&FixtureKind::Bandit { scale })?;
        let mut q = Proposal::tabular(env.action_count());
        let mut opt = Adam::new(CosineSchedule::new(0.01, iters), &q);
        let log = train(&env, &mut q, &cfg, iters, &mut opt, &RngStream::new(0), |_, _| {})?;
        let exact = brute_force_evidence(&env, &q, 1.0)?;
        let probs = q.action_probs(&env.initial_state())?;
        println!(
            "reward {scale}: q = ({:.3}, {:.3}), posterior = ({:.3}, {:.3}), TV {:.3}; Z = {:.5}, mean logZ over the last 100 sweeps {:.4}",
            probs[0],
            probs[1],
            exact.marginals[&env.initial_state()][0],
            exact.marginals[&env.initial_state()][1],
            exact.max_tv(&q)?,
            exact.z(),
            log.recent_log_z(100)
        );
    }
    Ok(())
}
