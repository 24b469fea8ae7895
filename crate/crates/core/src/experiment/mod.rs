//! Config-driven experiments: training and evaluating runs, oracles and
//! artifacts, behind the `vsmc` binary.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod run;

pub use artifacts::{ccdf, CcdfPlot, GridMap};
pub use commands::{cmd_bruteforce, cmd_ccdf, cmd_eval, cmd_map, cmd_oracle, cmd_train, stats_table, Overrides};
pub use config::{EnvKind, EnvSection, ExperimentConfig, PolicyKind};
pub use run::{evaluate_run, run_dir, run_rng, train_run, train_runs, trained_runs, WORKERS_ENV};
