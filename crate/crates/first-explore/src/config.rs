//! Experiment configuration: a single TOML document fully determines a run.
//!
//! The canonical serialization (with the output directory blanked, since
//! relocating outputs must not change results) is hashed into a `run_id`
//! that every output file carries, so artifacts can always be traced back
//! to the exact configuration that produced them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env::{Domain, EnvSpec};
use crate::model::ModelConfig;
use crate::training::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Treatment {
    FirstExplore,
    Ucb1,
    Ts,
    Random,
    CumulativeControl,
    Oracle,
}

impl Treatment {
    pub fn as_str(self) -> &'static str {
        match self {
            Treatment::FirstExplore => "first_explore",
            Treatment::Ucb1 => "ucb1",
            Treatment::Ts => "ts",
            Treatment::Random => "random",
            Treatment::CumulativeControl => "cumulative_control",
            Treatment::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "first_explore" => Ok(Treatment::FirstExplore),
            "ucb1" => Ok(Treatment::Ucb1),
            "ts" => Ok(Treatment::Ts),
            "random" => Ok(Treatment::Random),
            "cumulative_control" => Ok(Treatment::CumulativeControl),
            "oracle" => Ok(Treatment::Oracle),
            other => Err(ConfigError(format!(
                "unknown treatment {other:?}; expected one of first_explore, ucb1, ts, \
                 random, cumulative_control, oracle"
            ))),
        }
    }

    /// Treatments that require a trained model (and therefore a training
    /// section that will actually run).
    pub fn is_learned(self) -> bool {
        matches!(self, Treatment::FirstExplore | Treatment::CumulativeControl)
    }
}

/// Which environment distribution to run, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DomainConfig {
    Bandit { arms: usize, pulls: usize, mu1: f64, noise_variance: f64 },
    Darkroom { rho: f64, steps: usize, episodes: usize },
    Raymaze { p_treasure: f64, steps: usize, episodes: usize },
}

impl DomainConfig {
    pub fn name(&self) -> &'static str {
        match self {
            DomainConfig::Bandit { .. } => "bandit",
            DomainConfig::Darkroom { .. } => "darkroom",
            DomainConfig::Raymaze { .. } => "raymaze",
        }
    }

    /// Interaction shape of the configured domain, without sampling any
    /// environment.
    pub fn spec(&self) -> EnvSpec {
        match *self {
            DomainConfig::Bandit { arms, pulls, mu1, noise_variance } => {
                crate::bandit::BanditDomain::new(arms, pulls, mu1, noise_variance)
                    .spec()
                    .clone()
            }
            DomainConfig::Darkroom { rho, steps, episodes } => {
                crate::darkroom::DarkroomDomain::new(rho, steps, episodes).spec().clone()
            }
            DomainConfig::Raymaze { p_treasure, steps, episodes } => {
                crate::raymaze::RaymazeDomain::new(
                    8, p_treasure, 90.0, 15, 30.0, 0.5, steps, episodes,
                )
                .spec()
                .clone()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub hidden: usize,
    pub heads: usize,
    pub layers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSection {
    /// Environments sampled per candidate k when choosing k*.
    pub envs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSection {
    /// Environments sampled for the final evaluation sweep.
    pub envs: usize,
}

#[derive(Debug, Error)]
#[error("invalid config: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub treatment: Treatment,
    pub seed: u64,
    /// Where artifacts land. Excluded from the run id: the same experiment
    /// written to two directories is still the same experiment.
    pub out_dir: PathBuf,
    pub domain: DomainConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub selection: SelectionSection,
    pub eval: EvalSection,
}

impl ExperimentConfig {
    /// Ready-to-run starting point for a domain named on the command line.
    pub fn template(domain: &str) -> Result<Self, ConfigError> {
        let (domain, train) = match domain {
            "bandit" => (
                DomainConfig::Bandit { arms: 10, pulls: 100, mu1: 0.5, noise_variance: 0.5 },
                TrainConfig::default(),
            ),
            "darkroom" => (
                DomainConfig::Darkroom { rho: -4.0, steps: 9, episodes: 10 },
                TrainConfig { epsilon: 0.0, sync_period: 100, ..TrainConfig::default() },
            ),
            "raymaze" => (
                DomainConfig::Raymaze { p_treasure: 0.3, steps: 32, episodes: 4 },
                TrainConfig { epsilon: 0.0, sync_period: 100, ..TrainConfig::default() },
            ),
            other => {
                return Err(ConfigError(format!(
                    "unknown domain {other:?}; expected bandit, darkroom, or raymaze"
                )))
            }
        };
        let eval_envs = if domain.name() == "bandit" { 10_000 } else { 1_000 };
        Ok(ExperimentConfig {
            treatment: Treatment::Random,
            seed: 1,
            out_dir: PathBuf::from(format!("runs/{}", domain.name())),
            domain,
            model: ModelSection { hidden: 128, heads: 4, layers: 3 },
            train,
            selection: SelectionSection { envs: eval_envs / 10 },
            eval: EvalSection { envs: eval_envs },
        })
    }

    pub fn model_config(&self) -> ModelConfig {
        let spec = self.domain.spec();
        ModelConfig::new(&spec, self.model.hidden, self.model.heads, self.model.layers)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn check(ok: bool, msg: &str) -> Result<(), ConfigError> {
            if ok { Ok(()) } else { Err(ConfigError(msg.to_string())) }
        }
        match self.domain {
            DomainConfig::Bandit { arms, pulls, mu1, noise_variance } => {
                check(arms >= 2, "bandit.arms must be at least 2")?;
                check(pulls >= 1, "bandit.pulls must be at least 1")?;
                check(mu1.is_finite(), "bandit.mu1 must be finite")?;
                check(
                    noise_variance.is_finite() && noise_variance > 0.0,
                    "bandit.noise_variance must be positive",
                )?;
            }
            DomainConfig::Darkroom { rho, steps, episodes } => {
                check(rho.is_finite(), "darkroom.rho must be finite")?;
                check(steps >= 1, "darkroom.steps must be at least 1")?;
                check(episodes >= 1, "darkroom.episodes must be at least 1")?;
            }
            DomainConfig::Raymaze { p_treasure, steps, episodes } => {
                check(
                    (0.0..=1.0).contains(&p_treasure),
                    "raymaze.p_treasure must be in [0, 1]",
                )?;
                check(steps >= 1, "raymaze.steps must be at least 1")?;
                check(episodes >= 1, "raymaze.episodes must be at least 1")?;
            }
        }
        check(self.model.hidden >= 1, "model.hidden must be at least 1")?;
        check(self.model.heads >= 1, "model.heads must be at least 1")?;
        check(self.model.layers >= 1, "model.layers must be at least 1")?;
        check(
            self.model.hidden.is_multiple_of(self.model.heads),
            "model.hidden must be divisible by model.heads",
        )?;
        check(self.train.updates >= 1, "train.updates must be at least 1")?;
        check(self.train.batch_size >= 1, "train.batch_size must be at least 1")?;
        check(
            self.train.learning_rate.is_finite() && self.train.learning_rate > 0.0,
            "train.learning_rate must be positive",
        )?;
        check(
            (0.0..=1.0).contains(&self.train.warmup_frac),
            "train.warmup_frac must be in [0, 1]",
        )?;
        check(self.train.weight_decay >= 0.0, "train.weight_decay must be nonnegative")?;
        check(self.train.sync_period >= 1, "train.sync_period must be at least 1")?;
        check(
            (0.0..=1.0).contains(&self.train.epsilon),
            "train.epsilon must be in [0, 1]",
        )?;
        check(self.train.temperature > 0.0, "train.temperature must be positive")?;
        check(self.train.baseline_b.is_finite(), "train.baseline_b must be finite")?;
        check(self.selection.envs >= 1, "selection.envs must be at least 1")?;
        check(self.eval.envs >= 1, "eval.envs must be at least 1")?;
        if matches!(self.treatment, Treatment::Ucb1 | Treatment::Ts) {
            check(
                matches!(self.domain, DomainConfig::Bandit { .. }),
                "ucb1 and ts treatments are defined for the bandit domain only",
            )?;
        }
        Ok(())
    }

    /// Serialization used for hashing: identical configs produce identical
    /// text regardless of where their outputs go.
    pub fn canonical_toml(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        toml::to_string(&canonical).expect("config serializes to TOML")
    }

    /// Stable 16-hex-digit identifier derived from the canonical form.
    pub fn run_id(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}
