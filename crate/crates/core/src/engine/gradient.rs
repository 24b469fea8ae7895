//! Turning a sweep into weighted score-function terms.
//!
//! The surrogate is `log Z + sum_{t,i} stop(B_t) log q(a_{t,i} | s_{t,i})`.
//! Its gradient has two parts per sampled action: the score term with
//! learning signal `B_t`, and the pathwise derivative of `log Z` through the
//! particle's weight `w = r + T (log p - log q)`, which is `-T` times the
//! normalized weight recorded in the ledger. Both multiply
//! `grad log q(a | s)`, so each ledger entry becomes one term with
//! coefficient `B_t - b_t - T * weight`. Score terms of the resampling step
//! are left out.

use super::config::{Baseline, Objective, VariantConfig};
use super::sweep::SweepResult;
use crate::policy::ScoreTerm;

/// Learning signal for an action taken at `step`.
pub fn learning_signal(sr: &SweepResult, cfg: &VariantConfig, step: usize) -> f64 {
    match cfg.objective {
        Objective::Stratified => sr.log_z_suffix[step],
        Objective::Global => sr.log_z,
    }
}

pub fn assemble_gradient(sr: &SweepResult, cfg: &VariantConfig) -> Vec<ScoreTerm> {
    assemble_gradient_with_baseline(sr, cfg, None)
}

/// Like [`assemble_gradient`], additionally subtracting an external
/// per-step baseline `baseline[t]` from the signal of every action taken at
/// step `t`. The baseline must not depend on the sweep itself.
pub fn assemble_gradient_with_baseline(
    sr: &SweepResult,
    cfg: &VariantConfig,
    baseline: Option<&[f64]>,
) -> Vec<ScoreTerm> {
    sr.ledger
        .iter()
        .map(|e| {
            let external = baseline.and_then(|b| b.get(e.step)).copied().unwrap_or(0.0);
            let own = match cfg.baseline {
                Baseline::None => 0.0,
                Baseline::Mean => e.baseline,
            };
            ScoreTerm {
                state: e.state.clone(),
                action: e.action,
                coefficient: learning_signal(sr, cfg, e.step)
                    - own
                    - external
                    - sr.temperature * e.weight,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::sweep::sweep;
    use crate::env::{fixtures, FixtureKind};
    use crate::policy::Proposal;
    use crate::rng::RngStream;

    #[test]
    fn zero_temperature_is_pure_score() {
        let env = fixtures::build(&FixtureKind::binary_tree()).unwrap();
        let cfg = VariantConfig::vsmc();
        let sr = sweep(&env, &Proposal::tabular(2), &cfg, 0.0, &RngStream::new(2)).unwrap();
        for (term, e) in assemble_gradient(&sr, &cfg).iter().zip(&sr.ledger) {
            assert_eq!(term.coefficient, sr.log_z_suffix[e.step]);
        }
    }

    #[test]
    fn single_particle_coefficient() {
        let env = fixtures::build(&FixtureKind::binary_tree()).unwrap();
        let cfg = VariantConfig::vsa();
        let sr = sweep(&env, &Proposal::tabular(2), &cfg, 1.0, &RngStream::new(2)).unwrap();
        let terms = assemble_gradient(&sr, &cfg);
        assert_eq!(terms.len(), 2);
        for (term, e) in terms.iter().zip(&sr.ledger) {
            assert!((term.coefficient - (sr.log_z_suffix[e.step] - 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn global_objective_uses_total_evidence() {
        let env = fixtures::build(&FixtureKind::binary_tree()).unwrap();
        let cfg = VariantConfig {
            objective: Objective::Global,
            ..VariantConfig::vsmc()
        };
        let sr = sweep(&env, &Proposal::tabular(2), &cfg, 0.0, &RngStream::new(4)).unwrap();
        assert!(assemble_gradient(&sr, &cfg).iter().all(|t| t.coefficient == sr.log_z));
    }

    #[test]
    fn leave_one_out_baseline_on_the_bandit() {
        let env = fixtures::build(&FixtureKind::bandit()).unwrap();
        let cfg = VariantConfig {
            baseline: Baseline::Mean,
            particles: 3,
            ..VariantConfig::vsmc()
        };
        let sr = sweep(&env, &Proposal::tabular(2), &cfg, 1.0, &RngStream::new(6)).unwrap();
        // uniform proposal: step weights are the rewards
        let w: Vec<f64> = sr.ledger.iter().map(|e| if e.action == 0 { 1.0 } else { 0.0 }).collect();
        for (i, e) in sr.ledger.iter().enumerate() {
            let mut v = w.clone();
            v[i] = (w.iter().sum::<f64>() - w[i]) / 2.0;
            let loo = (v.iter().map(|x| x.exp()).sum::<f64>() / 3.0).ln();
            assert!((e.baseline - loo).abs() < 1e-12);
        }
        let terms = assemble_gradient(&sr, &cfg);
        for (t, e) in terms.iter().zip(&sr.ledger) {
            assert!((t.coefficient - (sr.log_z - e.baseline - e.weight)).abs() < 1e-12);
        }
    }
}
