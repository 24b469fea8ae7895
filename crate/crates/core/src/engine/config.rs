use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resampler {
    Systematic,
    Multinomial,
}

/// Which evidence estimate multiplies the score of an action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// The evidence accumulated from the action's step onwards.
    Stratified,
    /// The evidence of the whole sweep.
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    None,
    /// Subtract, for each sampled action, the step's evidence increment
    /// recomputed with that particle's weight replaced by the mean of the
    /// others'.
    Mean,
}

/// How the temperature moves from its initial value to 0 over training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anneal {
    None,
    Linear,
    Cosine,
}

impl Anneal {
    /// Temperature at iteration `k` of `total`.
    pub fn temperature(self, initial: f64, k: u64, total: u64) -> f64 {
        if total <= 1 {
            return initial;
        }
        let progress = k.min(total - 1) as f64 / (total - 1) as f64;
        match self {
            Anneal::None => initial,
            Anneal::Linear => initial * (1.0 - progress),
            Anneal::Cosine => initial * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariantConfig {
    pub particles: usize,
    /// Resample after every step. Off gives importance sampling.
    pub resample: bool,
    /// When set, resample only once the effective sample size drops below
    /// this fraction of the particle count.
    pub ess_threshold: Option<f64>,
    /// Memoize the first action drawn in each state, per particle.
    pub enforce_deterministic: bool,
    /// Couple transitions across particles through the shared memory.
    pub share_dynamics: bool,
    pub temperature: f64,
    pub anneal: Anneal,
    pub objective: Objective,
    pub baseline: Baseline,
    pub resampler: Resampler,
}

impl Default for VariantConfig {
    fn default() -> Self {
        VariantConfig::vsmc()
    }
}

impl VariantConfig {
    /// Ten particles, resampling every step, deterministic policies and
    /// shared dynamics.
    pub fn vsmc() -> Self {
        VariantConfig {
            particles: 10,
            resample: true,
            ess_threshold: None,
            enforce_deterministic: true,
            share_dynamics: true,
            temperature: 1.0,
            anneal: Anneal::None,
            objective: Objective::Stratified,
            baseline: Baseline::None,
            resampler: Resampler::Systematic,
        }
    }

    pub fn vis() -> Self {
        VariantConfig {
            resample: false,
            ..Self::vsmc()
        }
    }

    pub fn vsa() -> Self {
        VariantConfig {
            particles: 1,
            ..Self::vsmc()
        }
    }

    pub fn mixture() -> Self {
        VariantConfig {
            enforce_deterministic: false,
            ..Self::vsmc()
        }
    }

    pub fn independent() -> Self {
        VariantConfig {
            share_dynamics: false,
            ..Self::vsmc()
        }
    }

    /// Looks up a preset by name: `vsmc`, `vis`, `vsa`, `mixture`,
    /// `independent`.
    pub fn preset(name: &str) -> Result<Self> {
        Ok(match name {
            "vsmc" => Self::vsmc(),
            "vis" => Self::vis(),
            "vsa" => Self::vsa(),
            "mixture" => Self::mixture(),
            "independent" => Self::independent(),
            _ => return Err(Error::InvalidVariant(format!("unknown preset `{name}`"))),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::InvalidVariant("particles must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(Error::InvalidVariant(format!(
                "temperature {} outside [0, 1]",
                self.temperature
            )));
        }
        if let Some(t) = self.ess_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidVariant(format!("ess_threshold {t} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_differ_in_one_switch() {
        let base = VariantConfig::vsmc();
        assert_eq!(base.particles, 10);
        assert!(!VariantConfig::vis().resample);
        assert_eq!(VariantConfig::vsa().particles, 1);
        assert!(!VariantConfig::mixture().enforce_deterministic);
        assert!(!VariantConfig::independent().share_dynamics);
        assert!(VariantConfig::preset("nope").is_err());
    }

    #[test]
    fn validation() {
        let mut c = VariantConfig::vsmc();
        c.temperature = 1.5;
        assert!(c.validate().is_err());
        c.temperature = 0.0;
        c.particles = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn schedules() {
        assert_eq!(Anneal::None.temperature(0.7, 5, 10), 0.7);
        assert_eq!(Anneal::Linear.temperature(1.0, 0, 11), 1.0);
        assert!((Anneal::Linear.temperature(1.0, 5, 11) - 0.5).abs() < 1e-15);
        assert_eq!(Anneal::Linear.temperature(1.0, 10, 11), 0.0);
        assert!(Anneal::Cosine.temperature(1.0, 10, 11).abs() < 1e-15);
        assert!((Anneal::Cosine.temperature(1.0, 5, 11) - 0.5).abs() < 1e-15);
    }
}
