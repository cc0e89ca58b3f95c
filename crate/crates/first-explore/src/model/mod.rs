//! Causal sequence model over (action, observation, reward, timestep,
//! episode) tokens with two action heads sharing one backbone.
//!
//! Three entry points, all over the same parameters:
//! - [`seq::TrunkForward`]: full-sequence forward with cached activations,
//!   used by training; supports branch sequences that attend a trunk prefix
//!   and back-propagate into it.
//! - [`live::LiveSeq`]: incremental single-token inference with per-layer
//!   key/value caches, used by rollouts; forkable for branch episodes.
//! - [`params::PolicyParams`]: the named-tensor parameter store.

pub mod live;
pub mod math;
pub mod params;
pub mod seq;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvSpec;

/// Which final linear head maps hidden state to action logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Explore,
    Exploit,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("context holds {len} tokens but capacity is {capacity}")]
    ContextOverflow { len: usize, capacity: usize },
    #[error("observation has {got} entries, model expects {want}")]
    ObservationDimMismatch { got: usize, want: usize },
}

/// One context token. `action: None` marks a reset or begin token, which
/// embeds through the dedicated non-action row.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub action: Option<usize>,
    pub observation: Vec<f64>,
    pub reward: f64,
    /// 0 for reset/begin tokens, `t + 1` for the token carrying step `t`.
    pub timestep: usize,
    /// Explore episode `e` uses `e`; an exploit episode uses the number of
    /// explore episodes in its context.
    pub episode: usize,
}

impl Token {
    pub fn reset(observation: Vec<f64>, episode: usize) -> Self {
        Token { action: None, observation, reward: 0.0, timestep: 0, episode }
    }

    pub fn step(
        action: usize,
        observation: Vec<f64>,
        reward: f64,
        step_index: usize,
        episode: usize,
    ) -> Self {
        Token { action: Some(action), observation, reward, timestep: step_index + 1, episode }
    }

    pub fn is_reset(&self) -> bool {
        self.action.is_none()
    }
}

/// Ordered token history; push enforces strictly increasing
/// (episode, timestep) order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContextTokens {
    tokens: Vec<Token>,
}

impl ContextTokens {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, token: Token) {
        if let Some(last) = self.tokens.last() {
            assert!(
                (token.episode, token.timestep) > (last.episode, last.timestep),
                "tokens must arrive in strictly increasing (episode, timestep) order"
            );
        }
        self.tokens.push(token);
    }

    pub fn as_slice(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Shape of the sequence model; fixed per domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden: usize,
    pub heads: usize,
    pub layers: usize,
    pub action_count: usize,
    pub observation_dim: usize,
    /// Rows in the timestep table: slot 0 for reset/begin, slots 1..=h for steps.
    pub timestep_slots: usize,
    /// Rows in the episode table: indices 0..=n.
    pub episode_slots: usize,
    /// Domains without reset tokens get one internal begin token so the
    /// first action has a position to be predicted from.
    pub implicit_begin: bool,
    /// Episodes per meta-rollout; sizes the context capacity.
    pub episodes_per_rollout: usize,
    /// Steps per episode; sizes the context capacity.
    pub episode_len: usize,
}

impl ModelConfig {
    pub fn new(spec: &EnvSpec, hidden: usize, heads: usize, layers: usize) -> Self {
        assert!(hidden >= 1 && heads >= 1 && layers >= 1);
        assert!(hidden.is_multiple_of(heads), "hidden must divide evenly across heads");
        ModelConfig {
            hidden,
            heads,
            layers,
            action_count: spec.action_count,
            observation_dim: spec.observation_dim,
            timestep_slots: spec.episode_len + 1,
            episode_slots: spec.episodes_per_rollout + 1,
            implicit_begin: !spec.uses_reset_token,
            episodes_per_rollout: spec.episodes_per_rollout,
            episode_len: spec.episode_len,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    /// Tokens one episode contributes to a context.
    pub fn tokens_per_episode(&self) -> usize {
        if self.implicit_begin { self.episode_len } else { self.episode_len + 1 }
    }

    /// Hard cap on attended sequence length: a full trunk of explore
    /// episodes plus one branch episode and the begin token.
    pub fn capacity(&self) -> usize {
        (self.episodes_per_rollout + 1) * self.tokens_per_episode() + 1
    }
}

/// Samples an action: with probability `epsilon` uniform, otherwise from
/// the temperature-adjusted distribution `p_i^(1/t) / sum`.
///
/// When `epsilon` is zero no mixing coin is drawn, so rollouts with and
/// without mixing consume distinguishable but individually reproducible
/// randomness.
pub fn sample_action(dist: &[f64], temperature: f64, epsilon: f64, rng: &mut ChaCha8Rng) -> usize {
    assert!(temperature > 0.0);
    assert!((0.0..=1.0).contains(&epsilon));
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return rng.gen_range(0..dist.len());
    }
    let inv_t = 1.0 / temperature;
    let adjusted: Vec<f64> = dist.iter().map(|p| p.powf(inv_t)).collect();
    let total: f64 = adjusted.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in adjusted.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return i;
        }
    }
    dist.len() - 1
}

/// Lowest-index maximizer.
pub fn greedy_action(dist: &[f64]) -> usize {
    let mut best = 0;
    for (i, p) in dist.iter().enumerate().skip(1) {
        if *p > dist[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn spec() -> EnvSpec {
        EnvSpec::new("grid", 5, 2, 9, 10, 1.0, true)
    }

    #[test]
    fn config_sizes_tables_from_spec() {
        let cfg = ModelConfig::new(&spec(), 32, 4, 2);
        assert_eq!(cfg.timestep_slots, 10);
        assert_eq!(cfg.episode_slots, 11);
        assert!(!cfg.implicit_begin);
        assert_eq!(cfg.tokens_per_episode(), 10);
        assert_eq!(cfg.capacity(), 111);
    }

    #[test]
    fn bandit_style_spec_gets_begin_token() {
        let spec = EnvSpec::new("bandit", 10, 1, 1, 100, 1.0, false);
        let cfg = ModelConfig::new(&spec, 16, 2, 1);
        assert!(cfg.implicit_begin);
        assert_eq!(cfg.tokens_per_episode(), 1);
        assert_eq!(cfg.capacity(), 102);
    }

    #[test]
    #[should_panic(expected = "divide evenly")]
    fn uneven_heads_rejected() {
        ModelConfig::new(&spec(), 30, 4, 2);
    }

    #[test]
    fn context_orders_tokens() {
        let mut ctx = ContextTokens::new();
        ctx.push(Token::reset(vec![0.0, 0.0], 0));
        ctx.push(Token::step(1, vec![0.1, 0.2], 0.5, 0, 0));
        ctx.push(Token::step(2, vec![0.3, 0.4], 0.0, 1, 0));
        ctx.push(Token::reset(vec![0.0, 0.0], 1));
        assert_eq!(ctx.len(), 4);
    }

    #[test]
    #[should_panic(expected = "strictly increasing")]
    fn context_rejects_out_of_order_tokens() {
        let mut ctx = ContextTokens::new();
        ctx.push(Token::step(0, vec![0.0], 0.0, 1, 0));
        ctx.push(Token::step(0, vec![0.0], 0.0, 0, 0));
    }

    #[test]
    fn full_epsilon_is_uniform() {
        let mut rng = stream_rng(3, "model.sample", 0);
        let dist = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let n = 100_000;
        let mut counts = [0usize; 10];
        for _ in 0..n {
            counts[sample_action(&dist, 1.0, 1.0, &mut rng)] += 1;
        }
        let expected = n as f64 / 10.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // 9 degrees of freedom; 27.9 is the 99.9th percentile
        assert!(chi2 < 27.9, "chi2 {chi2}");
    }

    #[test]
    fn zero_epsilon_one_hot_is_deterministic() {
        let mut rng = stream_rng(3, "model.sample", 1);
        let dist = vec![0.0, 0.0, 1.0, 0.0];
        for _ in 0..1000 {
            assert_eq!(sample_action(&dist, 1.0, 0.0, &mut rng), 2);
        }
    }

    #[test]
    fn small_epsilon_mixes_at_the_declared_rate() {
        let mut rng = stream_rng(3, "model.sample", 2);
        let mut dist = vec![0.0; 10];
        dist[4] = 1.0;
        let n = 100_000;
        let hits = (0..n).filter(|_| sample_action(&dist, 1.0, 0.05, &mut rng) == 4).count();
        let rate = hits as f64 / n as f64;
        // 0.95 + 0.05/10
        assert!((rate - 0.955).abs() < 0.005, "rate {rate}");
    }

    #[test]
    fn greedy_takes_lowest_index_maximum() {
        assert_eq!(greedy_action(&[0.2, 0.5, 0.3]), 1);
        assert_eq!(greedy_action(&[0.5, 0.5]), 0);
        assert_eq!(greedy_action(&[0.0, 0.0, 1.0]), 2);
    }
}
