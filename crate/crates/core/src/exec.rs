//! Turning a trained proposal into behaviour.
//!
//! - [`ExecMode::DeterministicDraw`] samples an action from `q(s)` the first
//!   time a state is seen and replays it afterwards, so every episode (or, in
//!   persistent mode, every run) follows one deterministic policy drawn from
//!   the approximate posterior.
//! - [`ExecMode::PosteriorPredictive`] draws a fresh action from `q(s)` on
//!   every call.
//! - [`ExecMode::Argmax`] takes the most probable action, lowest index first.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, ActionSource, State};
use crate::policy::{sample_from, Proposal};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    #[serde(rename = "deterministic")]
    DeterministicDraw,
    #[serde(rename = "predictive")]
    PosteriorPredictive,
    Argmax,
}

impl ExecMode {
    pub const ALL: [ExecMode; 3] = [
        ExecMode::DeterministicDraw,
        ExecMode::PosteriorPredictive,
        ExecMode::Argmax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExecMode::DeterministicDraw => "deterministic",
            ExecMode::PosteriorPredictive => "predictive",
            ExecMode::Argmax => "argmax",
        }
    }
}

impl fmt::Display for ExecMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExecMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExecMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown mode `{s}` (deterministic, predictive, argmax)")))
    }
}

/// Smallest index attaining the maximum of `probs`.
pub fn argmax_tiebreak(probs: &[f64]) -> ActionId {
    let mut best = 0;
    for (a, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = a;
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct ExecutablePolicy {
    mode: ExecMode,
    proposal: Arc<Proposal>,
    memo: HashMap<State, ActionId>,
    persistent: bool,
    rng: RngStream,
}

impl ExecutablePolicy {
    pub fn new(proposal: Arc<Proposal>, mode: ExecMode, rng: RngStream) -> Self {
        ExecutablePolicy {
            mode,
            proposal,
            memo: HashMap::new(),
            persistent: false,
            rng,
        }
    }

    /// Keep the deterministic-draw memo across episodes, so that all
    /// episodes follow a single policy sample.
    pub fn persistent(mut self, on: bool) -> Self {
        self.persistent = on;
        self
    }

    pub fn is_persistent(&self) -> bool {
        self.persistent
    }

    pub fn mode(&self) -> ExecMode {
        self.mode
    }

    pub fn proposal(&self) -> &Proposal {
        &self.proposal
    }

    pub fn memo(&self) -> &HashMap<State, ActionId> {
        &self.memo
    }

    /// Marks an episode boundary: forgets drawn actions unless persistent,
    /// and moves to the random stream for the next episode.
    pub fn start_episode(&mut self, rng: RngStream) {
        if !self.persistent {
            self.memo.clear();
        }
        self.rng = rng;
    }

    pub fn act(&mut self, s: &State) -> Result<ActionId> {
        match self.mode {
            ExecMode::DeterministicDraw => {
                if let Some(&a) = self.memo.get(s) {
                    return Ok(a);
                }
                let (a, _) = sample_from(&self.proposal.action_probs(s)?, &mut self.rng);
                self.memo.insert(s.clone(), a);
                Ok(a)
            }
            ExecMode::PosteriorPredictive => {
                Ok(sample_from(&self.proposal.action_probs(s)?, &mut self.rng).0)
            }
            ExecMode::Argmax => Ok(argmax_tiebreak(&self.proposal.action_probs(s)?)),
        }
    }
}

impl ActionSource for ExecutablePolicy {
    fn act(&mut self, state: &State, _step: usize) -> Result<ActionId> {
        ExecutablePolicy::act(self, state)
    }
}
