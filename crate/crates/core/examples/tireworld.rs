//! Trains on a Triangle Tireworld instance and reports the outcome split.
//!
//! cargo run --release --example tireworld [instance] [iterations]

use std::sync::Arc;

use vsmc_policy::engine::{train, VariantConfig};
use vsmc_policy::env::{EnvSpec, TireworldSpec};
use vsmc_policy::eval::mc_evaluate;
use vsmc_policy::exec::{ExecMode, ExecutablePolicy};
use vsmc_policy::experiment::stats_table;
use vsmc_policy::policy::{Adam, CosineSchedule, Proposal, DEFAULT_HIDDEN};
use vsmc_policy::{Result, RngStream};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().ok());
    let instance = args.next().flatten().unwrap_or(1) as usize;
    let iters = args.next().flatten().unwrap_or(20_000);
    let env = EnvSpec::Tireworld(TireworldSpec::instance(instance)?).build()?;
    println!("{}: {} actions, horizon {}", env.id(), env.action_count(), env.horizon());
    let rng = RngStream::new(0);
    let mut q = Proposal::perceptron(env.as_ref(), DEFAULT_HIDDEN, &rng.fork("init"))?;
    let mut opt = Adam::new(CosineSchedule::new(1e-4, iters), &q);
    train(env.as_ref(), &mut q, &VariantConfig::vsmc(), iters, &mut opt, &rng.fork("train"), |_, _| {})?;
    let policy = ExecutablePolicy::new(Arc::new(q), ExecMode::PosteriorPredictive, rng.fork("policy"));
    let s = mc_evaluate(env.as_ref(), &policy, 10_000, &rng.fork("eval"))?;
    print!("{}", stats_table(env.as_ref(), "VSMC", &[s])?);
    Ok(())
}
