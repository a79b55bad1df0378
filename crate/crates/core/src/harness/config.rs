use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::actor::{StepSchedule, DEFAULT_THETA_MAX};
use crate::error::{Error, Result};
use crate::mdp::{load_model, validate_model, MdpModel, SoftmaxPolicy, DEFAULT_MAX_EPISODE_STEPS};

/// Initial policy parameters: the string `"zeros"` or an explicit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaInit {
    Named(String),
    Vector(Vec<f64>),
}

impl Default for ThetaInit {
    fn default() -> Self {
        ThetaInit::Named("zeros".into())
    }
}

fn default_gamma() -> f64 {
    1.0
}

fn default_theta_max() -> Option<f64> {
    Some(DEFAULT_THETA_MAX)
}

fn default_max_steps() -> usize {
    DEFAULT_MAX_EPISODE_STEPS
}

/// One training run. Loaded from JSON; unknown fields are rejected.
///
/// A relative `model` path is resolved against the directory of the config
/// file; `output` is used as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: PathBuf,
    pub mu: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub schedule: StepSchedule,
    pub episodes: u64,
    pub seed: u64,
    #[serde(default)]
    pub reward_baseline: f64,
    #[serde(default)]
    pub theta_init: ThetaInit,
    pub eval_every: u64,
    pub output: PathBuf,
    #[serde(default = "default_max_steps")]
    pub max_episode_steps: usize,
    /// `null` disables the clamp.
    #[serde(default = "default_theta_max")]
    pub theta_max: Option<f64>,
}

impl ExperimentConfig {
    /// Defaults for everything but the model path, budget and output.
    pub fn new(model: impl Into<PathBuf>, mu: f64, episodes: u64, output: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            model: model.into(),
            mu,
            gamma: 1.0,
            schedule: StepSchedule::default(),
            episodes,
            seed: 0,
            reward_baseline: 0.0,
            theta_init: ThetaInit::default(),
            eval_every: episodes.max(1),
            output: output.into(),
            max_episode_steps: DEFAULT_MAX_EPISODE_STEPS,
            theta_max: Some(DEFAULT_THETA_MAX),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if cfg.model.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.model = dir.join(&cfg.model);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be a finite nonnegative number, got {}", self.mu));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma {} not in (0, 1]", self.gamma));
        }
        if self.episodes == 0 {
            return bad("episodes must be at least 1".into());
        }
        if self.eval_every == 0 || self.eval_every > self.episodes {
            return bad(format!(
                "eval_every must lie in 1..={} (got {})",
                self.episodes, self.eval_every
            ));
        }
        if !self.reward_baseline.is_finite() {
            return bad("reward_baseline must be finite".into());
        }
        if self.max_episode_steps == 0 {
            return bad("max_episode_steps must be positive".into());
        }
        if let Some(b) = self.theta_max {
            if !(b > 0.0) {
                return bad(format!("theta_max must be positive, got {b}"));
            }
        }
        match &self.theta_init {
            ThetaInit::Named(n) if n != "zeros" => {
                return bad(format!("theta_init must be \"zeros\" or a vector, got {n:?}"))
            }
            ThetaInit::Vector(v) if v.iter().any(|x| !x.is_finite()) => {
                return bad("theta_init has non-finite entries".into())
            }
            _ => {}
        }
        self.schedule.validate()
    }
}

/// A validated config together with the model it runs on (reward baseline
/// and discount already applied).
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: MdpModel,
}

impl Experiment {
    /// Loads the config and the model file it points to.
    pub fn load(config_path: impl AsRef<Path>) -> Result<Self> {
        let config = ExperimentConfig::load(config_path)?;
        let model = load_model(&config.model)?;
        Self::with_model(model, config)
    }

    /// Uses an in-memory model; `config.model` is ignored.
    pub fn with_model(model: MdpModel, config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let model = model
            .with_reward_baseline(config.reward_baseline)
            .with_gamma(config.gamma)?;
        validate_model(&model).into_result()?;
        Ok(Experiment { config, model })
    }

    pub fn initial_policy(&self) -> Result<SoftmaxPolicy> {
        match &self.config.theta_init {
            ThetaInit::Vector(v) => {
                let n = SoftmaxPolicy::param_count(&self.model);
                if v.len() != n {
                    return Err(Error::InvalidConfig(format!(
                        "theta_init has {} entries, the model needs {n}",
                        v.len()
                    )));
                }
                SoftmaxPolicy::new(&self.model, v.clone())
            }
            ThetaInit::Named(_) => Ok(SoftmaxPolicy::zeros(&self.model)),
        }
    }
}
