//! Evaluation harness and ground-truth oracles.

pub mod brute;
pub mod monte_carlo;
pub mod solve;
pub mod stats;

pub use brute::{brute_force_evidence, BruteForce, PolicyMass, ENUMERATION_BUDGET};
pub use monte_carlo::{collect_trajectories, evaluate_with, mc_evaluate};
pub use solve::{policy_value, solve_finite_horizon, ExactSolution};
pub use stats::{compare_runs, pairwise_sum, MetricSummary, ReturnStats, RunSummary};
