use std::path::PathBuf;

use thiserror::Error;

use crate::mdp::{ActionId, State};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("action {action} out of range for environment with {action_count} actions")]
    InvalidAction { action: ActionId, action_count: usize },

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("unknown fixture kind `{0}`")]
    UnknownFixture(String),

    #[error("environment `{0}` has no explicit model")]
    MissingModel(String),

    #[error("invalid state key: {0}")]
    InvalidStateKey(String),

    #[error("non-finite proposal parameters")]
    NonFiniteParameters,

    #[error("non-finite gradient at parameter {index} (value {value})")]
    NonFiniteGradient { index: usize, value: f64 },

    #[error("non-finite coefficient {0} in gradient ledger")]
    NonFiniteCoefficient(f64),

    #[error("non-finite particle weight at step {step}, particle {particle}, state {state:?}, action {action}: {weight}")]
    NonFiniteWeight {
        step: usize,
        particle: usize,
        state: State,
        action: ActionId,
        weight: f64,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid variant configuration: {0}")]
    InvalidVariant(String),

    #[error("enumeration budget exceeded: {needed} policies > {budget}")]
    EnumerationBudget { needed: f64, budget: usize },

    #[error("at least {needed} runs are required, got {got}")]
    NotEnoughRuns { needed: usize, got: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("checkpoint was trained on `{found}` but the config describes `{expected}`")]
    EnvMismatch { expected: String, found: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from user input (bad flags, config, files)
    /// rather than from a failure while running.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Usage(_)
                | Error::Io { .. }
                | Error::EnvMismatch { .. }
                | Error::Checkpoint(_)
                | Error::UnknownFixture(_)
                | Error::InvalidEnvironment(_)
                | Error::InvalidVariant(_)
                | Error::MissingModel(_)
        )
    }
}
