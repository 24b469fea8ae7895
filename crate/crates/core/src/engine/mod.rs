//! The modified SMC sweep, gradient assembly and training.

pub mod config;
pub mod gradient;
pub mod resample;
pub mod sweep;
pub mod train;

pub use config::{Anneal, Baseline, Objective, Resampler, VariantConfig};
pub use gradient::{assemble_gradient, assemble_gradient_with_baseline};
pub use sweep::{
    select_action, sweep, sweep_with, LedgerEntry, ParticleState, Selection, SharedDynamics,
    SweepOptions, SweepResult, TransitionRecord,
};
pub use train::{train, TrainingLog, TrainingRecord};
