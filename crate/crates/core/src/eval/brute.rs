//! Exact evidence and policy posterior by enumeration on small models.
//!
//! Two quantities are computed:
//!
//! - the evidence of the policy posterior, `Z = sum_pi p(pi) exp(E[R | pi])`
//!   over all deterministic assignments of actions to the model's
//!   non-absorbing states, together with the posterior itself;
//! - the expectation of the sweep's estimate `Z_hat` for a given proposal and
//!   temperature. Every particle draws each action at most once per state and
//!   every `(state, action, count)` transition afresh, so this expectation is
//!   the single-trajectory integral of `exp(sum of weights)`; it equals
//!   `sum_pi p(pi) E[exp(R) | pi]` at temperature 1 and coincides with `Z`
//!   when the dynamics are deterministic.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, Environment, State, TabularModel};
use crate::policy::{prior_logp, Proposal};

/// Largest number of deterministic policies (or sweep paths) enumerated.
pub const ENUMERATION_BUDGET: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyMass {
    /// One action per non-absorbing model state, in model order.
    pub actions: Vec<(State, ActionId)>,
    pub expected_return: f64,
    pub posterior: f64,
}

#[derive(Clone, Debug)]
pub struct BruteForce {
    pub log_z: f64,
    /// `log E[Z_hat]` for the proposal and temperature passed in.
    pub log_z_sweep: f64,
    pub policies: Vec<PolicyMass>,
    /// Per state: posterior probability of each action, weighting every
    /// policy by its posterior mass times the probability that it visits
    /// the state. For deterministic dynamics this is the posterior over the
    /// state's action among policies that reach it.
    pub marginals: BTreeMap<State, Vec<f64>>,
}

impl BruteForce {
    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }

    pub fn z_sweep(&self) -> f64 {
        self.log_z_sweep.exp()
    }

    /// Total-variation distance between `q(s)` and the posterior marginal at
    /// every state with a marginal, maximized over states.
    pub fn max_tv(&self, proposal: &Proposal) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (s, m) in &self.marginals {
            let q = proposal.action_probs(s)?;
            let tv = 0.5 * q.iter().zip(m).map(|(a, b)| (a - b).abs()).sum::<f64>();
            worst = worst.max(tv);
        }
        Ok(worst)
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Exact `E[R]` and the probability of visiting each state under the
/// stationary policy `pick`, over `actions` transitions.
fn evaluate(model: &TabularModel, actions: usize, pick: &[ActionId]) -> (f64, Vec<f64>) {
    let n = model.len();
    let mut v = vec![0.0; n];
    for _ in 0..actions {
        v = (0..n)
            .map(|s| {
                if model.is_absorbing(s) {
                    return 0.0;
                }
                model
                    .transitions(s, pick[s])
                    .iter()
                    .map(|t| t.prob * (t.reward + v[t.next]))
                    .sum()
            })
            .collect();
    }
    // hitting probability of `target` within the episode: mass that has not
    // yet touched it is propagated, mass that reaches it is banked
    let visit = (0..n)
        .map(|target| {
            let mut dist = vec![0.0; n];
            dist[model.initial()] = 1.0;
            let mut hit = 0.0;
            for t in 0..=actions {
                hit += dist[target];
                dist[target] = 0.0;
                if t == actions {
                    break;
                }
                let mut next = vec![0.0; n];
                for (s, &mass) in dist.iter().enumerate() {
                    if mass == 0.0 {
                        continue;
                    }
                    if model.is_absorbing(s) {
                        next[s] += mass;
                        continue;
                    }
                    for tr in model.transitions(s, pick[s]) {
                        next[tr.next] += mass * tr.prob;
                    }
                }
                dist = next;
            }
            hit
        })
        .collect();
    (v[model.initial()], visit)
}

struct SweepIntegral<'a> {
    model: &'a TabularModel,
    probs: Vec<Vec<f64>>,
    log_prior: f64,
    temperature: f64,
    actions: usize,
    paths: usize,
}

impl SweepIntegral<'_> {
    /// Contribution of all continuations from `s` after `t` transitions,
    /// with `memo` holding the actions already drawn.
    fn from(&mut self, s: usize, t: usize, memo: &mut Vec<Option<ActionId>>) -> Result<f64> {
        if t == self.actions || self.model.is_absorbing(s) {
            self.paths += 1;
            if self.paths > 100 * ENUMERATION_BUDGET {
                return Err(Error::EnumerationBudget {
                    needed: self.paths as f64,
                    budget: 100 * ENUMERATION_BUDGET,
                });
            }
            return Ok(1.0);
        }
        let choices: Vec<(ActionId, f64)> = match memo[s] {
            Some(a) => vec![(a, 1.0)],
            None => (0..self.model.action_count())
                .filter(|&a| self.probs[s][a] > 0.0)
                .map(|a| {
                    let lq = self.probs[s][a].ln();
                    (a, (lq + self.temperature * (self.log_prior - lq)).exp())
                })
                .collect(),
        };
        let fresh = memo[s].is_none();
        let mut total = 0.0;
        for (a, factor) in choices {
            if fresh {
                memo[s] = Some(a);
            }
            let mut inner = 0.0;
            for tr in self.model.transitions(s, a) {
                inner += tr.prob * tr.reward.exp() * self.from(tr.next, t + 1, memo)?;
            }
            total += factor * inner;
        }
        if fresh {
            memo[s] = None;
        }
        Ok(total)
    }
}

/// Exact evidence, posterior and expected sweep estimate on a model small
/// enough to enumerate.
pub fn brute_force_evidence(env: &dyn Environment, proposal: &Proposal, temperature: f64) -> Result<BruteForce> {
    let model = env.model().ok_or_else(|| Error::MissingModel(env.id()))?;
    let na = model.action_count();
    let actions = env.horizon().saturating_sub(1);
    let open: Vec<usize> = (0..model.len()).filter(|&s| !model.is_absorbing(s)).collect();
    let needed = (na as f64).powi(open.len() as i32);
    if needed > ENUMERATION_BUDGET as f64 {
        return Err(Error::EnumerationBudget {
            needed,
            budget: ENUMERATION_BUDGET,
        });
    }
    let log_prior = prior_logp(na);
    let mut pick = vec![0; model.len()];
    let mut evaluated = Vec::with_capacity(needed as usize);
    for code in 0..needed as usize {
        let mut c = code;
        for &s in &open {
            pick[s] = c % na;
            c /= na;
        }
        let (ret, visit) = evaluate(model, actions, &pick);
        evaluated.push((pick.clone(), ret, visit));
    }
    let log_mass: Vec<f64> = evaluated
        .iter()
        .map(|(_, r, _)| open.len() as f64 * log_prior + r)
        .collect();
    let log_z = log_sum_exp(&log_mass);
    let mut weighted = vec![vec![0.0; na]; model.len()];
    let policies = evaluated
        .into_iter()
        .zip(&log_mass)
        .map(|((pick, ret, visit), lm)| {
            let posterior = (lm - log_z).exp();
            for &s in &open {
                weighted[s][pick[s]] += posterior * visit[s];
            }
            PolicyMass {
                actions: open.iter().map(|&s| (model.states()[s].clone(), pick[s])).collect(),
                expected_return: ret,
                posterior,
            }
        })
        .collect();
    let marginals = open
        .iter()
        .filter_map(|&s| {
            let total: f64 = weighted[s].iter().sum();
            (total > 0.0).then(|| {
                let m = weighted[s].iter().map(|w| w / total).collect();
                (model.states()[s].clone(), m)
            })
        })
        .collect();

    let probs = (0..model.len())
        .map(|s| {
            if model.is_absorbing(s) {
                Ok(vec![0.0; na])
            } else {
                proposal.action_probs(&model.states()[s])
            }
        })
        .collect::<Result<_>>()?;
    let mut integral = SweepIntegral {
        model,
        probs,
        log_prior,
        temperature,
        actions,
        paths: 0,
    };
    let z_sweep = integral.from(model.initial(), 0, &mut vec![None; model.len()])?;
    Ok(BruteForce {
        log_z,
        log_z_sweep: z_sweep.ln(),
        policies,
        marginals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{fixtures, FixtureKind};
    use crate::policy::Tabular;

    fn uniform(a: usize) -> Proposal {
        Proposal::tabular(a)
    }

    #[test]
    fn bandit_evidence_and_posterior() {
        let env = fixtures::build(&FixtureKind::bandit()).unwrap();
        let bf = brute_force_evidence(&env, &uniform(2), 1.0).unwrap();
        let e = 1f64.exp();
        assert!((bf.z() - (e + 1.0) / 2.0).abs() < 1e-12);
        assert!((bf.z_sweep() - bf.z()).abs() < 1e-12);
        let m = &bf.marginals[&env.initial_state()];
        assert!((m[0] - e / (e + 1.0)).abs() < 1e-12);
        assert_eq!(bf.policies.len(), 2);
    }

    #[test]
    fn one_policy_chain() {
        let env = fixtures::build(&FixtureKind::Chain).unwrap();
        let bf = brute_force_evidence(&env, &uniform(1), 1.0).unwrap();
        assert!((bf.log_z - 1.5).abs() < 1e-12);
        assert_eq!(bf.policies.len(), 1);
        assert!((bf.policies[0].posterior - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_tree_is_uniform() {
        let env = fixtures::build(&FixtureKind::BinaryTree { rewards: [0.0; 6] }).unwrap();
        let bf = brute_force_evidence(&env, &uniform(2), 1.0).unwrap();
        assert!(bf.log_z.abs() < 1e-12);
        assert!(bf.log_z_sweep.abs() < 1e-12);
        assert!(bf.policies.iter().all(|p| (p.posterior - 0.125).abs() < 1e-12));
        assert!(bf.marginals.values().flatten().all(|m| (m - 0.5).abs() < 1e-12));
    }

    #[test]
    fn tree_marginal_conditions_on_reaching_the_state() {
        let env = fixtures::build(&FixtureKind::binary_tree()).unwrap();
        let bf = brute_force_evidence(&env, &uniform(2), 1.0).unwrap();
        let m = env.model().unwrap();
        // the first child reached from the root: its two leaves pay 1 and 0
        let child = m.states()[m.transitions(m.initial(), 0)[0].next].clone();
        let e = 1f64.exp();
        assert!((bf.marginals[&child][0] - e / (e + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn annealed_sweep_integral_depends_on_proposal() {
        let env = fixtures::build(&FixtureKind::bandit()).unwrap();
        let mut t = Tabular::new(2);
        t.set_logits(env.initial_state(), vec![1.0, 0.0]).unwrap();
        let q = Proposal::Tabular(t);
        let bf = brute_force_evidence(&env, &q, 0.0).unwrap();
        let p = q.action_probs(&env.initial_state()).unwrap();
        assert!((bf.z_sweep() - (p[0] * 1f64.exp() + p[1])).abs() < 1e-12);
        let half = brute_force_evidence(&env, &q, 0.5).unwrap();
        let want = p[0].sqrt() * 0.5f64.sqrt() * 1f64.exp() + p[1].sqrt() * 0.5f64.sqrt();
        assert!((half.z_sweep() - want).abs() < 1e-12);
    }

    #[test]
    fn stochastic_loop_sweep_evidence_exceeds_target() {
        let env = fixtures::build(&FixtureKind::StochasticLoop).unwrap();
        let bf = brute_force_evidence(&env, &uniform(2), 1.0).unwrap();
        // Jensen: E[exp R] >= exp E[R] policy by policy
        assert!(bf.log_z_sweep > bf.log_z);
        let total: f64 = bf.policies.iter().map(|p| p.posterior).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let env = crate::env::blackjack::Blackjack::new().unwrap();
        assert!(matches!(
            brute_force_evidence(&env, &uniform(2), 1.0),
            Err(Error::EnumerationBudget { .. })
        ));
    }
}
