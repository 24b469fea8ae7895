//! Anneals the temperature to zero on the unimodal grid world, which drives
//! the proposal towards a single high-return policy, and renders the map.
//!
//! cargo run --release --example annealed_map [iterations] [output.svg]

use std::sync::Arc;

use vsmc_policy::engine::{train, Anneal, VariantConfig};
use vsmc_policy::env::gridworld::builtin_layout;
use vsmc_policy::env::{EnvSpec, GridWorldSpec};
use vsmc_policy::eval::{collect_trajectories, mc_evaluate};
use vsmc_policy::exec::{ExecMode, ExecutablePolicy};
use vsmc_policy::experiment::GridMap;
use vsmc_policy::policy::{Adam, CosineSchedule, Proposal, DEFAULT_HIDDEN};
use vsmc_policy::{Error, Result, RngStream};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let iters: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(10_000);
    let out = args.next().unwrap_or_else(|| "annealed_map.svg".to_string());
    let spec = GridWorldSpec::parse(builtin_layout("unimodal").unwrap())?;
    let env = EnvSpec::GridWorld(spec.clone()).build()?;
    let rng = RngStream::new(0);
    let cfg = VariantConfig { anneal: Anneal::Linear, ..VariantConfig::vsmc() };
    let mut q = Proposal::perceptron(env.as_ref(), DEFAULT_HIDDEN, &rng.fork("init"))?;
    let mut opt = Adam::new(CosineSchedule::new(3e-4, iters), &q);
    train(env.as_ref(), &mut q, &cfg, iters, &mut opt, &rng.fork("train"), |_, _| {})?;
    let q = Arc::new(q);
    for mode in [ExecMode::PosteriorPredictive, ExecMode::Argmax] {
        let p = ExecutablePolicy::new(q.clone(), mode, rng.fork("policy"));
        let s = mc_evaluate(env.as_ref(), &p, 10_000, &rng.fork("eval"))?;
        println!("{mode:>10}: return {:.3} ± {:.3}, goal {:.3}", s.mean, s.std_err, s.outcome_prob("goal"));
    }
    let p = ExecutablePolicy::new(q.clone(), ExecMode::PosteriorPredictive, rng.fork("policy"));
    let traj = collect_trajectories(env.as_ref(), &p, 1_000, &rng.fork("map"))?;
    let map = GridMap::from_run(&spec, &q, &traj)?;
    std::fs::write(&out, map.to_svg()).map_err(|e| Error::io(std::path::Path::new(&out), e))?;
    println!("wrote {out}");
    Ok(())
}
