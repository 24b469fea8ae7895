//! Finite-horizon value iteration over an explicit model.

use crate::error::{Error, Result};
use crate::exec::argmax_tiebreak;
use crate::mdp::{ActionId, ActionSource, Environment, State, TabularModel};

/// Optimal values and actions by steps remaining.
///
/// Index `k` of `q`, `values` and `policy` holds the quantities with `k`
/// actions left, for every model state. Absorbing states have value 0.
#[derive(Clone, Debug)]
pub struct ExactSolution {
    pub model: TabularModel,
    pub q: Vec<Vec<Vec<f64>>>,
    pub values: Vec<Vec<f64>>,
    pub policy: Vec<Vec<ActionId>>,
    /// Optimal expected return from the initial state over the full horizon.
    pub value: f64,
}

impl ExactSolution {
    pub fn actions_left(&self) -> usize {
        self.values.len() - 1
    }

    /// Optimal action in `s` with `k` actions left, or `None` for states the
    /// model does not contain.
    pub fn action(&self, s: &State, k: usize) -> Option<ActionId> {
        let i = self.model.index_of(s)?;
        Some(self.policy[k.min(self.actions_left())][i])
    }

    /// The optimal (non-stationary) policy as an action source.
    pub fn actor(&self) -> impl ActionSource + '_ {
        move |s: &State, step: usize| {
            let k = self.actions_left().saturating_sub(step);
            self.action(s, k)
                .ok_or_else(|| Error::InvalidEnvironment(format!("state {s:?} is not in the model")))
        }
    }
}

/// Backward induction over steps remaining, breaking ties towards the lowest
/// action index.
pub fn solve_finite_horizon(env: &dyn Environment) -> Result<ExactSolution> {
    let model = env.model().ok_or_else(|| Error::MissingModel(env.id()))?.clone();
    let actions = env.horizon().saturating_sub(1);
    let n = model.len();
    let na = model.action_count();
    let mut values = vec![vec![0.0; n]];
    let mut q = vec![vec![vec![0.0; na]; n]];
    let mut policy = vec![vec![0; n]];
    for _ in 0..actions {
        let prev = values.last().unwrap();
        let mut qk = vec![vec![0.0; na]; n];
        let mut vk = vec![0.0; n];
        let mut pk = vec![0; n];
        for s in 0..n {
            if model.is_absorbing(s) {
                continue;
            }
            for a in 0..na {
                qk[s][a] = model
                    .transitions(s, a)
                    .iter()
                    .map(|t| t.prob * (t.reward + prev[t.next]))
                    .sum();
            }
            pk[s] = argmax_tiebreak(&qk[s]);
            vk[s] = qk[s][pk[s]];
        }
        q.push(qk);
        values.push(vk);
        policy.push(pk);
    }
    let value = values[actions][model.initial()];
    Ok(ExactSolution {
        model,
        q,
        values,
        policy,
        value,
    })
}

/// Exact expected return of a stationary deterministic policy `pick` from
/// the initial state.
pub fn policy_value(env: &dyn Environment, pick: impl Fn(usize) -> ActionId) -> Result<f64> {
    let model = env.model().ok_or_else(|| Error::MissingModel(env.id()))?;
    let mut v = vec![0.0; model.len()];
    for _ in 0..env.horizon().saturating_sub(1) {
        v = (0..model.len())
            .map(|s| {
                if model.is_absorbing(s) {
                    return 0.0;
                }
                model
                    .transitions(s, pick(s))
                    .iter()
                    .map(|t| t.prob * (t.reward + v[t.next]))
                    .sum()
            })
            .collect();
    }
    Ok(v[model.initial()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::gridworld::{GridWorld, GridWorldSpec};
    use crate::env::{fixtures, FixtureKind};

    #[test]
    fn bandit_prefers_high_arm() {
        let env = fixtures::build(&FixtureKind::bandit()).unwrap();
        let sol = solve_finite_horizon(&env).unwrap();
        assert_eq!(sol.value, 1.0);
        assert_eq!(sol.action(&env.initial_state(), 1), Some(0));
    }

    #[test]
    fn tree_takes_best_leaf() {
        let env = fixtures::build(&FixtureKind::binary_tree()).unwrap();
        let sol = solve_finite_horizon(&env).unwrap();
        // right then right: 0.5 + 0.8 beats 0 + 1
        assert!((sol.value - 1.3).abs() < 1e-12);
        assert_eq!(sol.action(&env.initial_state(), 2), Some(1));
    }

    #[test]
    fn deterministic_grid_reaches_goal() {
        let spec = GridWorldSpec::parse("p_succ=1\nhorizon=6\nS.y\n").unwrap();
        let env = GridWorld::new(spec).unwrap();
        let sol = solve_finite_horizon(&env).unwrap();
        assert_eq!(sol.value, 5.0);
    }

    #[test]
    fn policy_value_of_each_bandit_arm() {
        let env = fixtures::build(&FixtureKind::bandit()).unwrap();
        assert_eq!(policy_value(&env, |_| 0).unwrap(), 1.0);
        assert_eq!(policy_value(&env, |_| 1).unwrap(), 0.0);
    }
}
