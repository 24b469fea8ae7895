//! The episodic MDP simulator contract shared by every other module.
//!
//! An environment is touched only through [`simulate_step`], which samples a
//! successor and a reward. Episodes always run a fixed number of state visits
//! `H` (so `H - 1` actions); absorbing states loop on themselves with reward 0.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::{stable_hash, RngStream};

pub type ActionId = usize;

/// Outcome label of a finished episode, e.g. `"win"` or `"timeout"`.
pub type Outcome = &'static str;

/// A state in its factored representation.
///
/// Equality, ordering and hashing are by feature content, so two states are
/// equal exactly when their canonical keys are equal.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    features: Arc<[i32]>,
}

impl State {
    pub fn new(features: impl Into<Arc<[i32]>>) -> Self {
        State {
            features: features.into(),
        }
    }

    pub fn features(&self) -> &[i32] {
        &self.features
    }

    /// Canonical byte key: little-endian length followed by little-endian
    /// features.
    pub fn key(&self) -> StateKey {
        let mut bytes = Vec::with_capacity(4 + 4 * self.features.len());
        bytes.extend_from_slice(&(self.features.len() as u32).to_le_bytes());
        for f in self.features.iter() {
            bytes.extend_from_slice(&f.to_le_bytes());
        }
        StateKey(bytes)
    }

    pub fn from_key(key: &StateKey) -> Result<State> {
        let b = &key.0;
        if b.len() < 4 {
            return Err(Error::InvalidStateKey("shorter than length prefix".into()));
        }
        let n = u32::from_le_bytes(b[..4].try_into().unwrap()) as usize;
        if b.len() != 4 + 4 * n {
            return Err(Error::InvalidStateKey(format!(
                "length prefix {n} does not match {} bytes",
                b.len()
            )));
        }
        let features: Vec<i32> = b[4..]
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(State::new(features))
    }

    /// Stable 64-bit digest of the key, used as an RNG label.
    pub fn digest(&self) -> u64 {
        stable_hash(&self.key().0)
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "State{:?}", &self.features[..])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey(pub Vec<u8>);

impl StateKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

pub fn state_key(s: &State) -> StateKey {
    s.key()
}

/// One outcome of an explicit transition row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// Explicit enumeration of a finite MDP: reachable states, `p(s'|s,a)` and
/// rewards. Used only by oracles.
#[derive(Clone, Debug)]
pub struct TabularModel {
    states: Vec<State>,
    index: HashMap<State, usize>,
    absorbing: Vec<bool>,
    rows: Vec<Vec<Vec<Transition>>>,
    action_count: usize,
}

impl TabularModel {
    /// Explores everything reachable from `initial` with breadth-first search.
    /// `outcomes(s, a)` lists `(successor, probability, reward)` for
    /// non-absorbing `s`; duplicate successors are merged.
    pub fn explore<F>(
        initial: &State,
        action_count: usize,
        is_absorbing: impl Fn(&State) -> bool,
        mut outcomes: F,
    ) -> Result<TabularModel>
    where
        F: FnMut(&State, ActionId) -> Vec<(State, f64, f64)>,
    {
        let mut model = TabularModel {
            states: Vec::new(),
            index: HashMap::new(),
            absorbing: Vec::new(),
            rows: Vec::new(),
            action_count,
        };
        model.intern(initial.clone(), &is_absorbing);
        let mut cursor = 0;
        while cursor < model.states.len() {
            let s = model.states[cursor].clone();
            let mut row = Vec::with_capacity(action_count);
            for a in 0..action_count {
                let mut merged: Vec<Transition> = Vec::new();
                if model.absorbing[cursor] {
                    merged.push(Transition {
                        next: cursor,
                        prob: 1.0,
                        reward: 0.0,
                    });
                } else {
                    for (next, prob, reward) in outcomes(&s, a) {
                        if prob == 0.0 {
                            continue;
                        }
                        let j = model.intern(next, &is_absorbing);
                        match merged.iter_mut().find(|t| t.next == j) {
                            Some(t) => {
                                if (t.reward - reward).abs() > 1e-12 {
                                    return Err(Error::InvalidEnvironment(format!(
                                        "state {s:?} action {a}: one successor with two rewards"
                                    )));
                                }
                                t.prob += prob;
                            }
                            None => merged.push(Transition {
                                next: j,
                                prob,
                                reward,
                            }),
                        }
                    }
                }
                let total: f64 = merged.iter().map(|t| t.prob).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidEnvironment(format!(
                        "state {s:?} action {a}: transition row sums to {total}"
                    )));
                }
                row.push(merged);
            }
            model.rows.push(row);
            cursor += 1;
        }
        Ok(model)
    }

    fn intern(&mut self, s: State, is_absorbing: &impl Fn(&State) -> bool) -> usize {
        if let Some(&i) = self.index.get(&s) {
            return i;
        }
        let i = self.states.len();
        self.absorbing.push(is_absorbing(&s));
        self.index.insert(s.clone(), i);
        self.states.push(s);
        i
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    /// Index of the initial state (always 0).
    pub fn initial(&self) -> usize {
        0
    }

    pub fn index_of(&self, s: &State) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn is_absorbing(&self, i: usize) -> bool {
        self.absorbing[i]
    }

    pub fn transitions(&self, s: usize, a: ActionId) -> &[Transition] {
        &self.rows[s][a]
    }

    /// True when every row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.rows.iter().flatten().all(|r| r.len() == 1)
    }
}

/// The generative model of an episodic MDP.
pub trait Environment: Send + Sync + fmt::Debug {
    /// Stable identifier, recorded in checkpoints.
    fn id(&self) -> String;

    fn action_count(&self) -> usize;

    /// Number of state visits per episode.
    fn horizon(&self) -> usize;

    fn initial_state(&self) -> State;

    fn feature_dim(&self) -> usize;

    /// Divisors applied to the features before they enter a perceptron.
    fn feature_scale(&self) -> Vec<f64> {
        vec![1.0; self.feature_dim()]
    }

    fn is_absorbing(&self, s: &State) -> bool;

    /// Samples the successor and reward of a non-absorbing state. Callers go
    /// through [`simulate_step`], which validates the action and handles
    /// absorbing states.
    fn transition(&self, s: &State, a: ActionId, rng: &mut RngStream) -> (State, f64);

    /// Labels the episode that ended in `last` after the full horizon.
    fn outcome(&self, last: &State) -> Outcome;

    /// All labels [`Environment::outcome`] may return, in report order.
    fn outcome_labels(&self) -> &'static [Outcome];

    /// Labels shown in the `loss, draw, win` columns of outcome tables, when
    /// the domain has such a reading.
    fn loss_draw_win(&self) -> Option<[Outcome; 3]> {
        None
    }

    fn model(&self) -> Option<&TabularModel> {
        None
    }

    /// Short human-readable rendering of a state.
    fn describe(&self, s: &State) -> String {
        format!("{:?}", s.features())
    }
}

pub type EnvHandle = Arc<dyn Environment>;

pub fn simulate_step(
    env: &dyn Environment,
    s: &State,
    a: ActionId,
    rng: &mut RngStream,
) -> Result<(State, f64)> {
    if a >= env.action_count() {
        return Err(Error::InvalidAction {
            action: a,
            action_count: env.action_count(),
        });
    }
    if env.is_absorbing(s) {
        return Ok((s.clone(), 0.0));
    }
    Ok(env.transition(s, a, rng))
}

/// Anything that picks actions during an episode. `step` is the 0-based index
/// of the current state visit.
pub trait ActionSource {
    fn act(&mut self, state: &State, step: usize) -> Result<ActionId>;
}

impl<F: FnMut(&State, usize) -> Result<ActionId>> ActionSource for F {
    fn act(&mut self, state: &State, step: usize) -> Result<ActionId> {
        self(state, step)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub state: State,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: State,
}

/// A finished episode.
///
/// `steps` stops at the first absorbing state; the remaining
/// `actions - steps.len()` transitions are implicit zero-reward self-loops.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub actions: usize,
    pub initial: State,
    pub total_return: f64,
    pub outcome: Outcome,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.steps
            .last()
            .map(|s| &s.next_state)
            .unwrap_or(&self.initial)
    }

    /// All `H` visited states, including padded absorbing visits.
    pub fn visited_states(&self) -> impl Iterator<Item = &State> {
        let padding = self.actions - self.steps.len();
        std::iter::once(&self.initial)
            .chain(self.steps.iter().map(|s| &s.next_state))
            .chain(std::iter::repeat_n(self.final_state(), padding))
    }
}

pub fn run_episode(
    env: &dyn Environment,
    act: &mut dyn ActionSource,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    let initial = env.initial_state();
    let actions = env.horizon().saturating_sub(1);
    let mut steps = Vec::new();
    let mut s = initial.clone();
    let mut total = 0.0;
    for t in 0..actions {
        if env.is_absorbing(&s) {
            break;
        }
        let a = act.act(&s, t)?;
        let (next, r) = simulate_step(env, &s, a, rng)?;
        total += r;
        steps.push(Step {
            state: s,
            action: a,
            reward: r,
            next_state: next.clone(),
        });
        s = next;
    }
    Ok(Trajectory {
        outcome: env.outcome(&s),
        steps,
        actions,
        initial,
        total_return: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn key_round_trips(features in proptest::collection::vec(any::<i32>(), 0..40)) {
            let s = State::new(features);
            prop_assert_eq!(State::from_key(&s.key()).unwrap(), s);
        }

        #[test]
        fn key_is_injective(a in proptest::collection::vec(-5i32..5, 1..6),
                            b in proptest::collection::vec(-5i32..5, 1..6)) {
            let (sa, sb) = (State::new(a.clone()), State::new(b.clone()));
            prop_assert_eq!(a == b, sa.key() == sb.key());
        }
    }

    #[test]
    fn equal_features_equal_keys() {
        assert_eq!(State::new(vec![1, 2]).key(), State::new(vec![1, 2]).key());
    }

    #[test]
    fn transposed_cells_have_distinct_keys() {
        assert_ne!(State::new(vec![1, 2]).key(), State::new(vec![2, 1]).key());
    }

    #[test]
    fn key_bytes_are_stable() {
        let k = State::new(vec![1, -1]).key();
        assert_eq!(
            k.as_bytes(),
            &[2, 0, 0, 0, 1, 0, 0, 0, 0xff, 0xff, 0xff, 0xff]
        );
    }

    #[test]
    fn malformed_key_is_rejected() {
        assert!(State::from_key(&StateKey(vec![3, 0, 0, 0, 1])).is_err());
    }
}
