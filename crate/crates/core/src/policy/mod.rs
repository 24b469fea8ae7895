//! The variational proposal `q(a | s)`: a categorical distribution over
//! actions whose logits come from a table or a perceptron.

pub mod checkpoint;
pub mod optim;
pub mod perceptron;

use std::collections::BTreeMap;

pub use checkpoint::Checkpoint;
pub use optim::{Adam, CosineSchedule};
pub use perceptron::{Perceptron, DEFAULT_HIDDEN};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, Environment, State};
use crate::rng::RngStream;

/// Logits per state; states without a row have all-zero logits.
#[derive(Clone, Debug, PartialEq)]
pub struct Tabular {
    action_count: usize,
    rows: BTreeMap<State, Vec<f64>>,
}

impl Tabular {
    pub fn new(action_count: usize) -> Self {
        Tabular {
            action_count,
            rows: BTreeMap::new(),
        }
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn rows(&self) -> &BTreeMap<State, Vec<f64>> {
        &self.rows
    }

    pub fn rows_mut(&mut self) -> &mut BTreeMap<State, Vec<f64>> {
        &mut self.rows
    }

    pub fn set_logits(&mut self, s: State, logits: Vec<f64>) -> Result<()> {
        if logits.len() != self.action_count {
            return Err(Error::ShapeMismatch(format!(
                "{} logits for {} actions",
                logits.len(),
                self.action_count
            )));
        }
        self.rows.insert(s, logits);
        Ok(())
    }

    pub fn logits(&self, s: &State) -> Vec<f64> {
        self.rows
            .get(s)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.action_count])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Proposal {
    Tabular(Tabular),
    Perceptron(Perceptron),
}

impl Proposal {
    pub fn tabular(action_count: usize) -> Self {
        Proposal::Tabular(Tabular::new(action_count))
    }

    /// A freshly initialised perceptron sized for `env`.
    pub fn perceptron(env: &dyn Environment, hidden: usize, rng: &RngStream) -> Result<Self> {
        Ok(Proposal::Perceptron(Perceptron::new(
            env.feature_dim(),
            hidden,
            env.action_count(),
            env.feature_scale(),
            rng,
        )?))
    }

    pub fn action_count(&self) -> usize {
        match self {
            Proposal::Tabular(t) => t.action_count,
            Proposal::Perceptron(p) => p.action_count(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Proposal::Tabular(_) => "tabular",
            Proposal::Perceptron(_) => "perceptron",
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Proposal::Tabular(t) => t.rows.values().flatten().all(|v| v.is_finite()),
            Proposal::Perceptron(p) => p.params().iter().all(|v| v.is_finite()),
        }
    }

    pub fn logits(&self, s: &State) -> Result<Vec<f64>> {
        match self {
            Proposal::Tabular(t) => {
                let l = t.logits(s);
                if l.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteParameters);
                }
                Ok(l)
            }
            Proposal::Perceptron(p) => Ok(p.forward(s)?.logits),
        }
    }

    pub fn action_probs(&self, s: &State) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(s)?))
    }

    pub fn sample_action(&self, s: &State, rng: &mut RngStream) -> Result<(ActionId, f64)> {
        Ok(sample_from(&self.action_probs(s)?, rng))
    }

    pub fn new_accumulator(&self) -> GradAccumulator {
        match self {
            Proposal::Tabular(_) => GradAccumulator::Rows(BTreeMap::new()),
            Proposal::Perceptron(p) => GradAccumulator::Dense(vec![0.0; p.params().len()]),
        }
    }

    /// Adds `sum_k c_k * grad log q(a_k | s_k)` to `acc`.
    ///
    /// Terms are grouped by state so every distinct state costs one forward
    /// and one backward pass: for a state with coefficient vector `c` over
    /// actions the logit gradient is `c - (sum c) * q`.
    pub fn backprop_weighted_logq(&self, terms: &[ScoreTerm], acc: &mut GradAccumulator) -> Result<()> {
        let a_count = self.action_count();
        let mut grouped: BTreeMap<&State, Vec<f64>> = BTreeMap::new();
        for t in terms {
            if t.action >= a_count {
                return Err(Error::InvalidAction {
                    action: t.action,
                    action_count: a_count,
                });
            }
            if !t.coefficient.is_finite() {
                return Err(Error::NonFiniteCoefficient(t.coefficient));
            }
            grouped.entry(&t.state).or_insert_with(|| vec![0.0; a_count])[t.action] += t.coefficient;
        }
        match (self, acc) {
            (Proposal::Tabular(tab), GradAccumulator::Rows(rows)) => {
                for (s, c) in grouped {
                    let g = logit_gradient(&softmax(&tab.logits(s)), &c);
                    let row = rows.entry(s.clone()).or_insert_with(|| vec![0.0; a_count]);
                    for (r, gi) in row.iter_mut().zip(g) {
                        *r += gi;
                    }
                }
                Ok(())
            }
            (Proposal::Perceptron(net), GradAccumulator::Dense(grad)) => {
                if grad.len() != net.params().len() {
                    return Err(Error::ShapeMismatch(format!(
                        "accumulator has {} entries, network {}",
                        grad.len(),
                        net.params().len()
                    )));
                }
                for (s, c) in grouped {
                    let act = net.forward(s)?;
                    let g = logit_gradient(&softmax(&act.logits), &c);
                    net.backward(&act, &g, grad);
                }
                Ok(())
            }
            _ => Err(Error::ShapeMismatch(
                "accumulator kind does not match the proposal".into(),
            )),
        }
    }
}

fn logit_gradient(q: &[f64], c: &[f64]) -> Vec<f64> {
    let total: f64 = c.iter().sum();
    c.iter().zip(q).map(|(ci, qi)| ci - total * qi).collect()
}

/// One weighted score-function term `c * grad log q(a | s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTerm {
    pub state: State,
    pub action: ActionId,
    pub coefficient: f64,
}

/// Gradient storage congruent with a [`Proposal`].
#[derive(Clone, Debug, PartialEq)]
pub enum GradAccumulator {
    Rows(BTreeMap<State, Vec<f64>>),
    Dense(Vec<f64>),
}

impl GradAccumulator {
    pub fn zero(&mut self) {
        match self {
            GradAccumulator::Rows(r) => r.clear(),
            GradAccumulator::Dense(d) => d.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    /// Adds `other` into `self`.
    pub fn merge(&mut self, other: &GradAccumulator) -> Result<()> {
        match (self, other) {
            (GradAccumulator::Rows(a), GradAccumulator::Rows(b)) => {
                for (s, row) in b {
                    let dst = a.entry(s.clone()).or_insert_with(|| vec![0.0; row.len()]);
                    for (x, y) in dst.iter_mut().zip(row) {
                        *x += y;
                    }
                }
                Ok(())
            }
            (GradAccumulator::Dense(a), GradAccumulator::Dense(b)) if a.len() == b.len() => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(())
            }
            _ => Err(Error::ShapeMismatch("cannot merge accumulators".into())),
        }
    }

    pub fn scale(&mut self, k: f64) {
        match self {
            GradAccumulator::Rows(r) => r.values_mut().flatten().for_each(|v| *v *= k),
            GradAccumulator::Dense(d) => d.iter_mut().for_each(|v| *v *= k),
        }
    }

    /// Squared Euclidean norm.
    pub fn norm_sq(&self) -> f64 {
        match self {
            GradAccumulator::Rows(r) => r.values().flatten().map(|v| v * v).sum(),
            GradAccumulator::Dense(d) => d.iter().map(|v| v * v).sum(),
        }
    }
}

/// Softmax with the maximum subtracted first.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Inverse-CDF draw from `probs`, returning the action and its log-probability.
pub fn sample_from(probs: &[f64], rng: &mut RngStream) -> (ActionId, f64) {
    let u = rng.uniform();
    let mut acc = 0.0;
    let mut chosen = probs.len() - 1;
    for (a, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            chosen = a;
            break;
        }
    }
    // guard against landing on a zero-probability tail through rounding
    while probs[chosen] == 0.0 && chosen > 0 {
        chosen -= 1;
    }
    (chosen, probs[chosen].ln())
}

/// Log-probability of any first-visit action under the uniform prior over
/// deterministic policies.
pub fn prior_logp(action_count: usize) -> f64 {
    -(action_count as f64).ln()
}
