//! Trains on an Academic Advising instance; the action space is every
//! admissible set of courses to take in a term.
//!
//! cargo run --release --example advising [instance] [iterations]

use std::sync::Arc;

use vsmc_policy::engine::{train, VariantConfig};
use vsmc_policy::env::{AdvisingSpec, EnvSpec};
use vsmc_policy::eval::mc_evaluate;
use vsmc_policy::exec::{ExecMode, ExecutablePolicy};
use vsmc_policy::experiment::stats_table;
use vsmc_policy::policy::{Adam, CosineSchedule, Proposal, DEFAULT_HIDDEN};
use vsmc_policy::{Result, RngStream};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().ok());
    let instance = args.next().flatten().unwrap_or(1) as usize;
    let iters = args.next().flatten().unwrap_or(5_000);
    let env = EnvSpec::Advising(AdvisingSpec::instance(instance)?).build()?;
    println!("{}: {} actions, horizon {}", env.id(), env.action_count(), env.horizon());
    let rng = RngStream::new(0);
    let mut q = Proposal::perceptron(env.as_ref(), DEFAULT_HIDDEN, &rng.fork("init"))?;
    let mut opt = Adam::new(CosineSchedule::new(1e-4, iters), &q);
    train(env.as_ref(), &mut q, &VariantConfig::vsmc(), iters, &mut opt, &rng.fork("train"), |_, _| {})?;
    let q = Arc::new(q);
    for mode in [ExecMode::PosteriorPredictive, ExecMode::Argmax] {
        let policy = ExecutablePolicy::new(q.clone(), mode, rng.fork("policy"));
        let s = mc_evaluate(env.as_ref(), &policy, 5_000, &rng.fork("eval"))?;
        print!("{}", stats_table(env.as_ref(), mode.name(), &[s])?);
    }
    Ok(())
}
