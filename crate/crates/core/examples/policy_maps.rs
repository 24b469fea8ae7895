//! Runs the config-driven pipeline end to end: train two runs on the
//! multimodal world, evaluate them, and emit the occupancy/policy map and
//! the return CCDF under a scratch directory.
//!
//! cargo run --release --example policy_maps [output-dir]

use std::path::PathBuf;

use vsmc_policy::experiment::{cmd_ccdf, cmd_eval, cmd_map, cmd_train, EnvKind, EnvSection, ExperimentConfig, Overrides};
use vsmc_policy::Result;

fn main() -> Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "policy_maps".into()).into();
    let mut cfg = ExperimentConfig::new(EnvSection {
        kind: EnvKind::GridWorld,
        layout: Some("multimodal".into()),
        file: None,
        instance: None,
        fixture: None,
        p_succ: None,
        horizon: None,
    });
    cfg.train.iterations = 5_000;
    cfg.train.base_lr = 3e-4;
    cfg.train.runs = 2;
    cfg.eval.episodes = 2_000;
    let o = Overrides { out: Some(out.clone()), ..Overrides::default() };
    print!("{}", cmd_train(cfg.clone(), &o)?);
    print!("{}", cmd_eval(cfg.clone(), &o)?);
    print!("{}", cmd_map(cfg, &o)?);
    let runs = (0..2).map(|r| out.join(format!("run_{r:02}/returns_predictive.csv"))).collect();
    print!("{}", cmd_ccdf(&[("vsmc".to_string(), runs)], &out.join("ccdf"))?);
    Ok(())
}
