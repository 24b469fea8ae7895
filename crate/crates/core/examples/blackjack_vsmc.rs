//! Trains a perceptron proposal on Blackjack and evaluates it under the
//! three execution modes.
//!
//! cargo run --release --example blackjack_vsmc [iterations]

use std::sync::Arc;

use vsmc_policy::engine::{train, VariantConfig};
use vsmc_policy::env::EnvSpec;
use vsmc_policy::eval::mc_evaluate;
use vsmc_policy::exec::{ExecMode, ExecutablePolicy};
use vsmc_policy::policy::{Adam, CosineSchedule, Proposal, DEFAULT_HIDDEN};
use vsmc_policy::{Result, RngStream};

fn main() -> Result<()> {
    let iters: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(50_000);
    let env = EnvSpec::Blackjack.build()?;
    let rng = RngStream::new(0);
    let mut q = Proposal::perceptron(env.as_ref(), DEFAULT_HIDDEN, &rng.fork("init"))?;
    let mut opt = Adam::new(CosineSchedule::new(1e-4, iters), &q);
    let log = train(env.as_ref(), &mut q, &VariantConfig::vsmc(), iters, &mut opt, &rng.fork("train"), |r, _| {
        if (r.iteration + 1) % 10_000 == 0 {
            println!("iteration {:>6}: logZ {:.3} wall {:.1}s", r.iteration + 1, r.log_z, r.wall_time);
        }
    })?;
    println!("mean logZ over the last 1000 sweeps {:.4}", log.recent_log_z(1000));
    let q = Arc::new(q);
    for mode in ExecMode::ALL {
        let policy = ExecutablePolicy::new(q.clone(), mode, rng.fork("policy"));
        let s = mc_evaluate(env.as_ref(), &policy, 10_000, &rng.fork("eval"))?;
        println!(
            "{mode:>13}: return {:.3} ± {:.3}, loss {:.3} draw {:.3} win {:.3}",
            s.mean,
            s.std_err,
            s.outcome_prob("loss"),
            s.outcome_prob("draw"),
            s.outcome_prob("win")
        );
    }
    Ok(())
}
