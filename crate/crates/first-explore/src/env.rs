//! Environment abstractions: sampled POMDP instances, episodes, and the
//! record a meta-rollout leaves behind.
//!
//! A [`Domain`] is a distribution over environments; [`Env`] is one sampled
//! instance. Policies interact through `reset` / `step` only, so observation
//! contents are entirely up to the domain.

use rand_chacha::ChaCha8Rng;

/// Static description of a domain's interaction shape.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnvSpec {
    pub state_space: String,
    pub action_count: usize,
    pub observation_dim: usize,
    /// Steps per episode (h).
    pub episode_len: usize,
    /// Episodes per meta-rollout (n).
    pub episodes_per_rollout: usize,
    /// Discount factor; 1 for every shipped domain, kept so the return
    /// computation stays general.
    pub discount: f64,
    /// Whether episodes are delimited by reset tokens in policy context.
    /// True for the grid domains, false for bandits.
    pub uses_reset_token: bool,
}

impl EnvSpec {
    pub fn new(
        state_space: impl Into<String>,
        action_count: usize,
        observation_dim: usize,
        episode_len: usize,
        episodes_per_rollout: usize,
        discount: f64,
        uses_reset_token: bool,
    ) -> Self {
        assert!(action_count >= 2, "need at least two actions");
        assert!(observation_dim >= 1);
        assert!(episode_len >= 1);
        assert!(episodes_per_rollout >= 1);
        assert!(discount > 0.0 && discount <= 1.0);
        Self {
            state_space: state_space.into(),
            action_count,
            observation_dim,
            episode_len,
            episodes_per_rollout,
            discount,
            uses_reset_token,
        }
    }
}

/// One sampled environment instance. Implementations are deterministic
/// functions of their inputs and the provided rng.
pub trait Env {
    /// Starts a new episode and returns the initial observation. Any
    /// per-episode state (consumed objects, triggered goals) resets here.
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    /// Applies an action; returns the following observation and reward.
    fn step(&mut self, action: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64);
}

/// A distribution over environment instances sharing one [`EnvSpec`].
pub trait Domain: Sync {
    type Instance: Env;
    fn spec(&self) -> &EnvSpec;
    fn sample(&self, rng: &mut ChaCha8Rng) -> Self::Instance;
}

/// One step as stored in an episode: the action taken, then the observation
/// and reward that followed it.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub action: usize,
    pub observation: Vec<f64>,
    pub reward: f64,
}

/// A completed episode: the initial observation plus exactly h steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub initial_observation: Vec<f64>,
    pub steps: Vec<Step>,
}

impl Episode {
    /// Discounted return; the shipped domains all use discount 1.
    pub fn ret(&self, discount: f64) -> f64 {
        let mut g = 0.0;
        let mut w = 1.0;
        for s in &self.steps {
            g += w * s.reward;
            w *= discount;
        }
        g
    }
}

/// Everything one interleaved meta-rollout leaves behind: n explore episodes,
/// n exploit episodes, and per-episode training labels.
#[derive(Debug, Clone)]
pub struct MetaRolloutRecord {
    pub explore_episodes: Vec<Episode>,
    pub exploit_episodes: Vec<Episode>,
    /// True where the exploit episode's return reached the best seen so far.
    pub exploit_maximal: Vec<bool>,
    /// True where the exploit episode's return strictly improved on it.
    pub explore_informative: Vec<bool>,
    pub baseline_b: f64,
}
