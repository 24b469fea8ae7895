//! Built-in environments.

pub mod advising;
pub mod blackjack;
pub mod fixtures;
pub mod gridworld;
pub mod tireworld;

use std::sync::Arc;

pub use advising::{Advising, AdvisingSpec};
pub use blackjack::Blackjack;
pub use fixtures::{FixtureKind, TableEnv};
pub use gridworld::{Cell, GridWorld, GridWorldSpec, Move};
pub use tireworld::{Tireworld, TireworldSpec};

use crate::error::Result;
use crate::mdp::EnvHandle;

pub fn make_gridworld(spec: GridWorldSpec) -> Result<EnvHandle> {
    Ok(Arc::new(GridWorld::new(spec)?))
}

pub fn make_blackjack() -> Result<EnvHandle> {
    Ok(Arc::new(Blackjack::new()?))
}

pub fn make_tireworld(spec: TireworldSpec) -> Result<EnvHandle> {
    Ok(Arc::new(Tireworld::new(spec)?))
}

pub fn make_advising(spec: AdvisingSpec) -> Result<EnvHandle> {
    Ok(Arc::new(Advising::new(spec)?))
}

pub fn make_fixture(kind: &FixtureKind) -> Result<EnvHandle> {
    Ok(Arc::new(fixtures::build(kind)?))
}

/// Any built-in environment, as a value.
#[derive(Clone, Debug, PartialEq)]
pub enum EnvSpec {
    GridWorld(GridWorldSpec),
    Blackjack,
    Tireworld(TireworldSpec),
    Advising(AdvisingSpec),
    Fixture(FixtureKind),
}

impl EnvSpec {
    pub fn build(&self) -> Result<EnvHandle> {
        match self {
            EnvSpec::GridWorld(s) => make_gridworld(s.clone()),
            EnvSpec::Blackjack => make_blackjack(),
            EnvSpec::Tireworld(s) => make_tireworld(s.clone()),
            EnvSpec::Advising(s) => make_advising(s.clone()),
            EnvSpec::Fixture(k) => make_fixture(k),
        }
    }

    pub fn is_gridworld(&self) -> bool {
        matches!(self, EnvSpec::GridWorld(_))
    }
}
