//! The interleaved meta-rollout engine.
//!
//! Explore episodes extend one cumulative context; exploit episodes run on
//! a fork of it and are discarded, so later episodes never see them. The
//! same discipline holds at inference, keeping the context distribution a
//! policy sees identical between training and evaluation.
//!
//! Rollouts record everything training needs to score the same decisions
//! under successor parameters: the context tokens, each prediction's
//! position and head, and the rollout policy's log probabilities.

use rand_chacha::ChaCha8Rng;

use crate::env::{Domain, Env, Episode, EnvSpec, MetaRolloutRecord, Step};
use crate::model::live::LiveSeq;
use crate::model::params::PolicyParams;
use crate::model::{greedy_action, sample_action, Head, ModelError, Token};

/// How a rollout draws actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionMode {
    /// Training rollouts: temperature sampling plus epsilon mixing.
    Sample { temperature: f64, epsilon: f64 },
    /// Evaluation rollouts: lowest-index argmax, no randomness consumed.
    Greedy,
}

/// One scored decision: where it was read, with which head, what was taken,
/// and the rollout policy's full log-probability vector at that point.
#[derive(Debug, Clone)]
pub struct RecordedPred {
    /// Sequence position: absolute in the trunk, local in a branch.
    pub pos: usize,
    pub head: Head,
    /// Ordinal of the episode this decision belongs to, for label lookup.
    pub episode: usize,
    pub action: usize,
    pub log_p_rollout: Vec<f64>,
}

/// One exploit episode's own tokens, attached to a trunk prefix.
#[derive(Debug, Clone)]
pub struct RecordedBranch {
    pub exploit_index: usize,
    pub prefix_len: usize,
    pub tokens: Vec<Token>,
    pub preds: Vec<RecordedPred>,
}

/// Token-level record of one training meta-rollout.
#[derive(Debug, Clone, Default)]
pub struct RecordedRollout {
    /// Cumulative context tokens, excluding any internal begin token.
    pub trunk_tokens: Vec<Token>,
    /// Predictions read at trunk positions: all explore decisions, plus
    /// exploit decisions for domains whose exploit episodes push no tokens.
    pub trunk_preds: Vec<RecordedPred>,
    pub branches: Vec<RecordedBranch>,
}

/// A training rollout: episodes with labels, plus the token record.
#[derive(Debug, Clone)]
pub struct TrainRollout {
    pub record: MetaRolloutRecord,
    pub tokens: RecordedRollout,
}

/// Labels exploit returns against a running best seeded at `b`: an episode
/// is maximal when it meets the best so far, informative when it strictly
/// improves on it. The best advances only on strict improvement.
pub fn label_returns(returns: &[f64], b: f64) -> (Vec<bool>, Vec<bool>) {
    let mut best = b;
    let mut maximal = Vec::with_capacity(returns.len());
    let mut informative = Vec::with_capacity(returns.len());
    for &r in returns {
        maximal.push(r >= best);
        informative.push(r > best);
        if r > best {
            best = r;
        }
    }
    (maximal, informative)
}

/// Quadratic reference labeling: recomputes the prior best from scratch for
/// every episode. Exists to cross-check [`label_returns`].
pub fn label_returns_rescan(returns: &[f64], b: f64) -> (Vec<bool>, Vec<bool>) {
    let n = returns.len();
    let mut maximal = Vec::with_capacity(n);
    let mut informative = Vec::with_capacity(n);
    for i in 0..n {
        let best = returns[..i].iter().cloned().fold(b, f64::max);
        maximal.push(returns[i] >= best);
        informative.push(returns[i] > best);
    }
    (maximal, informative)
}

struct EpisodeRun {
    episode: Episode,
    preds: Vec<RecordedPred>,
    pushed: Vec<Token>,
}

/// Runs one episode, reading each action at the live context's last
/// position. Step `t`'s token is skipped when `push_last_step` is false and
/// `t` is final, so discarded branches never pay for unread tokens.
#[allow(clippy::too_many_arguments)]
fn run_episode_on(
    live: &mut LiveSeq,
    head: Head,
    token_episode: usize,
    label_episode: usize,
    env: &mut impl Env,
    spec: &EnvSpec,
    mode: ActionMode,
    rng: &mut ChaCha8Rng,
    record: bool,
    push_last_step: bool,
) -> Result<EpisodeRun, ModelError> {
    let mut pushed = Vec::new();
    let initial_observation = env.reset(rng);
    if spec.uses_reset_token {
        let tok = Token::reset(initial_observation.clone(), token_episode);
        live.push(tok.clone())?;
        pushed.push(tok);
    }
    let mut steps = Vec::with_capacity(spec.episode_len);
    let mut preds = Vec::with_capacity(spec.episode_len);
    for t in 0..spec.episode_len {
        let (action, log_p) = match mode {
            ActionMode::Greedy => (greedy_action(&live.logits(head)), Vec::new()),
            ActionMode::Sample { temperature, epsilon } => {
                let log_p = live.log_probs(head, temperature);
                let probs: Vec<f64> = log_p.iter().map(|l| l.exp()).collect();
                (sample_action(&probs, 1.0, epsilon, rng), log_p)
            }
        };
        if record {
            preds.push(RecordedPred {
                pos: live.len() - 1,
                head,
                episode: label_episode,
                action,
                log_p_rollout: log_p,
            });
        }
        let (observation, reward) = env.step(action, rng);
        steps.push(Step { action, observation: observation.clone(), reward });
        if push_last_step || t + 1 < spec.episode_len {
            let tok = Token::step(action, observation, reward, t, token_episode);
            live.push(tok.clone())?;
            pushed.push(tok);
        }
    }
    Ok(EpisodeRun { episode: Episode { initial_observation, steps }, preds, pushed })
}

/// Whether exploit episodes carry tokens of their own. Without a reset
/// token a one-step episode is read entirely at the trunk's last position.
fn exploit_has_own_tokens(spec: &EnvSpec) -> bool {
    spec.uses_reset_token || spec.episode_len > 1
}

/// One interleaved training meta-rollout: for each of n rounds, an explore
/// episode extends the trunk, then an exploit episode runs against it and
/// is discarded. Exploit returns drive both label vectors.
pub fn run_training_rollout<D: Domain>(
    params: &PolicyParams,
    domain: &D,
    env: &mut D::Instance,
    b: f64,
    temperature: f64,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<TrainRollout, ModelError> {
    let spec = domain.spec();
    let mode = ActionMode::Sample { temperature, epsilon };
    let mut trunk = LiveSeq::new(params);
    let mut tokens = RecordedRollout::default();
    let mut explore_episodes = Vec::with_capacity(spec.episodes_per_rollout);
    let mut exploit_episodes = Vec::with_capacity(spec.episodes_per_rollout);

    for e in 0..spec.episodes_per_rollout {
        let explore =
            run_episode_on(&mut trunk, Head::Explore, e, e, env, spec, mode, rng, true, true)?;
        tokens.trunk_preds.extend(explore.preds);
        tokens.trunk_tokens.extend(explore.pushed);
        explore_episodes.push(explore.episode);

        let prefix_len = trunk.len();
        let exploit = if exploit_has_own_tokens(spec) {
            let mut fork = trunk.fork();
            run_episode_on(&mut fork, Head::Exploit, e + 1, e, env, spec, mode, rng, true, false)?
        } else {
            run_episode_on(&mut trunk, Head::Exploit, e + 1, e, env, spec, mode, rng, true, false)?
        };
        debug_assert_eq!(trunk.len(), prefix_len, "exploit episodes must not grow the trunk");
        let mut branch_preds = Vec::new();
        for pred in exploit.preds {
            if pred.pos < prefix_len {
                tokens.trunk_preds.push(pred);
            } else {
                branch_preds.push(RecordedPred { pos: pred.pos - prefix_len, ..pred });
            }
        }
        if !exploit.pushed.is_empty() {
            tokens.branches.push(RecordedBranch {
                exploit_index: e,
                prefix_len,
                tokens: exploit.pushed,
                preds: branch_preds,
            });
        } else {
            debug_assert!(branch_preds.is_empty());
        }
        exploit_episodes.push(exploit.episode);
    }

    let returns: Vec<f64> = exploit_episodes.iter().map(|ep| ep.ret(spec.discount)).collect();
    let (exploit_maximal, explore_informative) = label_returns(&returns, b);
    Ok(TrainRollout {
        record: MetaRolloutRecord {
            explore_episodes,
            exploit_episodes,
            exploit_maximal,
            explore_informative,
            baseline_b: b,
        },
        tokens,
    })
}

/// The combined policy at inference: explore for `k` episodes, then exploit
/// for the rest, greedily. Exploit episodes still branch and are discarded.
/// Returns the n per-episode returns in rollout order.
pub fn run_combined_rollout<D: Domain>(
    params: &PolicyParams,
    domain: &D,
    env: &mut D::Instance,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, ModelError> {
    let spec = domain.spec();
    assert!(k <= spec.episodes_per_rollout, "k must not exceed episodes per rollout");
    let mut trunk = LiveSeq::new(params);
    let mut returns = Vec::with_capacity(spec.episodes_per_rollout);
    for e in 0..k {
        let run = run_episode_on(
            &mut trunk,
            Head::Explore,
            e,
            e,
            env,
            spec,
            ActionMode::Greedy,
            rng,
            false,
            true,
        )?;
        returns.push(run.episode.ret(spec.discount));
    }
    for e in k..spec.episodes_per_rollout {
        let run = if exploit_has_own_tokens(spec) {
            let mut fork = trunk.fork();
            run_episode_on(
                &mut fork,
                Head::Exploit,
                k,
                e,
                env,
                spec,
                ActionMode::Greedy,
                rng,
                false,
                false,
            )?
        } else {
            run_episode_on(
                &mut trunk,
                Head::Exploit,
                k,
                e,
                env,
                spec,
                ActionMode::Greedy,
                rng,
                false,
                false,
            )?
        };
        returns.push(run.episode.ret(spec.discount));
    }
    Ok(returns)
}

/// Rollout for the single-policy cumulative-reward control: every episode
/// extends the context and is read with one head.
#[derive(Debug, Clone)]
pub struct ControlRollout {
    pub tokens: Vec<Token>,
    pub preds: Vec<RecordedPred>,
    pub returns: Vec<f64>,
}

pub fn run_control_rollout<D: Domain>(
    params: &PolicyParams,
    domain: &D,
    env: &mut D::Instance,
    head: Head,
    mode: ActionMode,
    rng: &mut ChaCha8Rng,
    record: bool,
) -> Result<ControlRollout, ModelError> {
    let spec = domain.spec();
    let mut trunk = LiveSeq::new(params);
    let mut out = ControlRollout { tokens: Vec::new(), preds: Vec::new(), returns: Vec::new() };
    for e in 0..spec.episodes_per_rollout {
        let run = run_episode_on(&mut trunk, head, e, e, env, spec, mode, rng, record, true)?;
        out.tokens.extend(run.pushed);
        out.preds.extend(run.preds);
        out.returns.push(run.episode.ret(spec.discount));
    }
    Ok(out)
}

/// Runs one episode against a fresh context, exposed for direct use.
pub fn run_episode<D: Domain>(
    params: &PolicyParams,
    domain: &D,
    env: &mut D::Instance,
    head: Head,
    mode: ActionMode,
    rng: &mut ChaCha8Rng,
) -> Result<Episode, ModelError> {
    let spec = domain.spec();
    let mut live = LiveSeq::new(params);
    let run = run_episode_on(&mut live, head, 0, 0, env, spec, mode, rng, false, true)?;
    Ok(run.episode)
}
