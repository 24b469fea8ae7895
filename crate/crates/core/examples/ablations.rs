//! Trains every variant preset on the multimodal grid world and prints one
//! stats row per variant.
//!
//! cargo run --release --example ablations [iterations]

use std::sync::Arc;

use vsmc_policy::engine::{train, VariantConfig};
use vsmc_policy::env::gridworld::builtin_layout;
use vsmc_policy::env::{EnvSpec, GridWorldSpec};
use vsmc_policy::eval::mc_evaluate;
use vsmc_policy::exec::{ExecMode, ExecutablePolicy};
use vsmc_policy::experiment::stats_table;
use vsmc_policy::policy::{Adam, CosineSchedule, Proposal, DEFAULT_HIDDEN};
use vsmc_policy::{Result, RngStream};

fn main() -> Result<()> {
    let iters: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10_000);
    let env = EnvSpec::GridWorld(GridWorldSpec::parse(builtin_layout("multimodal").unwrap())?).build()?;
    for name in ["vsmc", "vis", "vsa", "mixture", "independent"] {
        let cfg = VariantConfig::preset(name)?;
        let mut stats = Vec::new();
        for seed in 0..2 {
            let rng = RngStream::new(seed);
            let mut q = Proposal::perceptron(env.as_ref(), DEFAULT_HIDDEN, &rng.fork("init"))?;
            let mut opt = Adam::new(CosineSchedule::new(3e-4, iters), &q);
            train(env.as_ref(), &mut q, &cfg, iters, &mut opt, &rng.fork("train"), |_, _| {})?;
            let policy = ExecutablePolicy::new(Arc::new(q), ExecMode::PosteriorPredictive, rng.fork("policy"));
            stats.push(mc_evaluate(env.as_ref(), &policy, 5_000, &rng.fork("eval"))?);
        }
        print!("{}", stats_table(env.as_ref(), name, &stats)?);
    }
    Ok(())
}
