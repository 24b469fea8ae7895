//! Experiment configuration files.
//!
//! A config is a TOML document with the sections below; every key is
//! optional except `[env] kind`. `[variant]` accepts `preset = "<name>"`,
//! applied before the other keys of the section.
//!
//! ```toml
//! seed = 0
//!
//! [env]
//! kind = "gridworld"        # gridworld | blackjack | tireworld | advising | fixture
//! layout = "multimodal"     # gridworld: built-in layout name
//! file = "world.grid"       # gridworld/tireworld/advising: layout or instance file
//! instance = 1              # tireworld/advising: built-in instance 1..10
//! fixture = "bandit"        # fixture: see FixtureKind
//! p_succ = 0.8              # gridworld: overrides the layout's value
//! horizon = 20              # gridworld/tireworld/advising: overrides the horizon
//!
//! [policy]
//! kind = "perceptron"       # tabular | perceptron
//! hidden = 64
//!
//! [variant]                 # fields of VariantConfig
//! preset = "vsmc"
//!
//! [train]
//! iterations = 50000
//! base_lr = 0.0001
//! runs = 25
//! checkpoint_every = 0      # 0: only the final checkpoint
//!
//! [eval]
//! episodes = 10000
//! mode = "predictive"       # deterministic | predictive | argmax
//! persistent = false
//!
//! [output]
//! dir = "runs"
//! ```
//!
//! Relative `file` paths are resolved against the directory holding the
//! config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::VariantConfig;
use crate::env::gridworld::builtin_layout;
use crate::env::{AdvisingSpec, EnvSpec, FixtureKind, GridWorldSpec, TireworldSpec};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::policy::DEFAULT_HIDDEN;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    GridWorld,
    Blackjack,
    Tireworld,
    Advising,
    Fixture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub kind: EnvKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_succ: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Tabular,
    Perceptron,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    pub kind: PolicyKind,
    pub hidden: usize,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            kind: PolicyKind::Perceptron,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub iterations: u64,
    pub base_lr: f64,
    pub runs: usize,
    pub checkpoint_every: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            iterations: 50_000,
            base_lr: 1e-4,
            runs: 25,
            checkpoint_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub episodes: usize,
    pub mode: ExecMode,
    pub persistent: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            episodes: 10_000,
            mode: ExecMode::PosteriorPredictive,
            persistent: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("runs") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub env: EnvSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub variant: VariantConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory that relative env files are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    /// A config with defaults everywhere but the environment.
    pub fn new(env: EnvSection) -> Self {
        ExperimentConfig {
            seed: 0,
            env,
            policy: PolicySection::default(),
            variant: VariantConfig::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            output: OutputSection::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(toml::Value::Table(variant)) = doc.get_mut("variant") {
            if let Some(preset) = variant.remove("preset") {
                let name = preset
                    .as_str()
                    .ok_or_else(|| Error::Config("variant.preset: expected a string".into()))?;
                let base = VariantConfig::preset(name).map_err(|e| Error::Config(format!("variant.preset: {e}")))?;
                let mut merged = toml::Table::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
                merged.extend(std::mem::take(variant));
                *variant = merged;
            }
        }
        let cfg: ExperimentConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, m: String| Err(Error::Config(format!("{name}: {m}")));
        self.variant
            .validate()
            .map_err(|e| Error::Config(format!("variant: {e}")))?;
        if self.train.runs == 0 {
            return field("train.runs", "must be >= 1".into());
        }
        if !(self.train.base_lr > 0.0 && self.train.base_lr.is_finite()) {
            return field("train.base_lr", format!("{} is not a positive rate", self.train.base_lr));
        }
        if self.eval.episodes == 0 {
            return field("eval.episodes", "must be >= 1".into());
        }
        if self.policy.hidden == 0 {
            return field("policy.hidden", "must be >= 1".into());
        }
        let e = &self.env;
        let allowed: &[&str] = match e.kind {
            EnvKind::GridWorld => &["layout", "file", "p_succ", "horizon"],
            EnvKind::Blackjack => &[],
            EnvKind::Tireworld | EnvKind::Advising => &["file", "instance", "horizon"],
            EnvKind::Fixture => &["fixture"],
        };
        let present = [
            ("layout", e.layout.is_some()),
            ("file", e.file.is_some()),
            ("instance", e.instance.is_some()),
            ("fixture", e.fixture.is_some()),
            ("p_succ", e.p_succ.is_some()),
            ("horizon", e.horizon.is_some()),
        ];
        for (name, set) in present {
            if set && !allowed.contains(&name) {
                return field(&format!("env.{name}"), format!("not used by {:?} environments", e.kind));
            }
        }
        let sources = [e.layout.is_some(), e.file.is_some(), e.instance.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if sources > 1 {
            return field("env", "give only one of layout, file and instance".into());
        }
        if e.kind == EnvKind::Fixture && e.fixture.is_none() {
            return field("env.fixture", "required for fixture environments".into());
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn read_env_file(&self) -> Result<Option<String>> {
        match &self.env.file {
            None => Ok(None),
            Some(f) => {
                let path = self.resolve(f);
                std::fs::read_to_string(&path)
                    .map(Some)
                    .map_err(|e| Error::io(path, e))
            }
        }
    }

    /// The environment this config describes.
    pub fn env_spec(&self) -> Result<EnvSpec> {
        let e = &self.env;
        let text = self.read_env_file()?;
        Ok(match e.kind {
            EnvKind::GridWorld => {
                let layout = match (&text, &e.layout) {
                    (Some(t), _) => t.clone(),
                    (None, Some(name)) => builtin_layout(name)
                        .ok_or_else(|| Error::Config(format!("env.layout: unknown layout `{name}`")))?
                        .to_string(),
                    (None, None) => return Err(Error::Config("env: gridworld needs a layout or a file".into())),
                };
                let mut spec = GridWorldSpec::parse(&layout)?;
                if let Some(p) = e.p_succ {
                    spec.p_succ = p;
                }
                if let Some(h) = e.horizon {
                    spec.horizon = h;
                }
                spec.validate()?;
                EnvSpec::GridWorld(spec)
            }
            EnvKind::Blackjack => EnvSpec::Blackjack,
            EnvKind::Tireworld => {
                let mut spec = match text {
                    Some(t) => TireworldSpec::parse(&t)?,
                    None => TireworldSpec::instance(e.instance.unwrap_or(1))?,
                };
                if let Some(h) = e.horizon {
                    spec.horizon = h;
                }
                spec.validate()?;
                EnvSpec::Tireworld(spec)
            }
            EnvKind::Advising => {
                let mut spec = match text {
                    Some(t) => AdvisingSpec::parse(&t)?,
                    None => AdvisingSpec::instance(e.instance.unwrap_or(1))?,
                };
                if let Some(h) = e.horizon {
                    spec.horizon = h;
                }
                spec.validate()?;
                EnvSpec::Advising(spec)
            }
            EnvKind::Fixture => {
                let name = e.fixture.as_deref().unwrap_or_default();
                EnvSpec::Fixture(name.parse::<FixtureKind>()?)
            }
        })
    }
}
