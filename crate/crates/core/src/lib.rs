//! Bayesian posterior inference over deterministic policies of discrete
//! episodic MDPs.
//!
//! A policy is the latent variable; its unnormalized log-probability is its
//! expected return. The posterior is approximated with a modified variational
//! sequential Monte Carlo sweep in which every particle carries a lazily drawn
//! deterministic policy and all particles share one lazily sampled realization
//! of the environment dynamics.
//!
//! Module map:
//!
//! - [`mdp`]: simulator contract, states, trajectories, explicit models.
//! - [`rng`]: counter-based keyed random streams.
//! - [`env`]: grid worlds, Blackjack, Triangle Tireworld, Academic Advising and
//!   small analytic fixtures.
//! - [`policy`]: the categorical proposal (tabular or perceptron), exact
//!   gradients, Adam with cosine decay, checkpoints.
//! - [`engine`]: the sweep, gradient assembly and the training loop.
//! - [`exec`]: turning a trained proposal into behaviour.
//! - [`eval`]: Monte-Carlo evaluation, value iteration and brute-force evidence.
//! - [`experiment`]: config files, artifacts and the command implementations
//!   behind the `vsmc` binary.

pub mod engine;
pub mod env;
pub mod error;
pub mod eval;
pub mod exec;
pub mod experiment;
pub mod mdp;
pub mod policy;
pub mod rng;

pub use error::{Error, Result};
pub use mdp::{ActionId, EnvHandle, Environment, State, StateKey, Trajectory};
pub use rng::RngStream;
