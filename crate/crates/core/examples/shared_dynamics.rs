//! Shared versus independent dynamics on the small swamp world: where does
//! the proposal send the agent from the start cell?
//!
//! cargo run --release --example shared_dynamics [iterations] [seeds]

use std::sync::Arc;

use vsmc_policy::engine::{train, VariantConfig};
use vsmc_policy::env::gridworld::{builtin_layout, cell_state};
use vsmc_policy::env::{EnvSpec, GridWorldSpec};
use vsmc_policy::eval::mc_evaluate;
use vsmc_policy::exec::{ExecMode, ExecutablePolicy};
use vsmc_policy::policy::{Adam, CosineSchedule, Proposal, DEFAULT_HIDDEN};
use vsmc_policy::{Result, RngStream};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().ok());
    let iters = args.next().flatten().unwrap_or(10_000);
    let seeds = args.next().flatten().unwrap_or(5);
    let env = EnvSpec::GridWorld(GridWorldSpec::parse(builtin_layout("shared_dynamics").unwrap())?).build()?;
    let start = cell_state(1, 2);
    for (name, cfg) in [("shared", VariantConfig::vsmc()), ("independent", VariantConfig::independent())] {
        let mut returns = Vec::new();
        for seed in 0..seeds {
            let rng = RngStream::new(seed);
            let mut q = Proposal::perceptron(env.as_ref(), DEFAULT_HIDDEN, &rng.fork("init"))?;
            let mut opt = Adam::new(CosineSchedule::new(3e-4, iters), &q);
            train(env.as_ref(), &mut q, &cfg, iters, &mut opt, &rng.fork("train"), |_, _| {})?;
            let p = q.action_probs(&start)?;
            let policy = ExecutablePolicy::new(Arc::new(q), ExecMode::PosteriorPredictive, rng.fork("policy"));
            let s = mc_evaluate(env.as_ref(), &policy, 10_000, &rng.fork("eval"))?;
            println!(
                "{name:>11} seed {seed}: q at (1,2) right {:.3} up {:.3} down {:.3} left {:.3}; return {:.3}, goal {:.3} swamp {:.3}",
                p[0], p[1], p[2], p[3], s.mean, s.outcome_prob("goal"), s.outcome_prob("swamp")
            );
            returns.push(s.mean);
        }
        println!("{name:>11} mean return {:.3}", returns.iter().sum::<f64>() / returns.len() as f64);
    }
    Ok(())
}
