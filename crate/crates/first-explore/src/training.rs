//! Training by conditional action cloning.
//!
//! Rollouts are collected under frozen rollout parameters; a successor copy
//! is trained to imitate only the labeled decisions (informative explore
//! steps, maximal exploit steps), with each cloned step scored against the
//! product of the successor's policy and the rollout policy. The rollout
//! copy catches up to the successor every `sync_period` updates.
//!
//! Also hosts the cumulative-reward control trainer: a single policy over
//! one head, trained with a likelihood-ratio gradient on whole-rollout
//! cumulative reward against the batch-mean baseline.

use serde::{Deserialize, Serialize};

use crate::batch::{fold_indexed, map_indexed};
use crate::env::Domain;
use crate::model::params::PolicyParams;
use crate::model::seq::{
    backward, forward_branch, forward_trunk, head_logits, HeadGrad, PrefixGrads, SeqForward,
};
use crate::model::{Head, ModelConfig, ModelError};
use crate::rng::stream_rng;
use crate::rollout::{
    run_control_rollout, run_training_rollout, ActionMode, ControlRollout, RecordedPred,
    TrainRollout,
};

/// Optimization settings shared by the main and control trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub updates: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fraction of training spent on linear warmup; the rest decays to zero.
    pub warmup_frac: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub clip_norm: f64,
    /// Updates between syncs of the rollout copy to the successor.
    pub sync_period: usize,
    /// Uniform mixing weight for rollout action sampling.
    pub epsilon: f64,
    pub temperature: f64,
    /// Seed value for the running best an exploit return must reach.
    pub baseline_b: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            updates: 1000,
            batch_size: 128,
            learning_rate: 3e-4,
            warmup_frac: 0.1,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            clip_norm: 1.0,
            sync_period: 1,
            epsilon: 0.05,
            temperature: 1.0,
            baseline_b: 0.0,
        }
    }
}

/// Learning rate at a training progress point in [0, 1]: linear warmup to
/// the peak over the first `warmup_frac`, then linear decay to zero.
pub fn schedule_lr(peak: f64, warmup_frac: f64, progress: f64) -> f64 {
    let decay = if warmup_frac < 1.0 { (1.0 - progress) / (1.0 - warmup_frac) } else { 0.0 };
    let factor = if warmup_frac > 0.0 { decay.min(progress / warmup_frac) } else { decay };
    peak * factor.clamp(0.0, 1.0)
}

/// AdamW with decoupled weight decay applied to every tensor.
#[derive(Debug, Clone)]
pub struct AdamW {
    m: PolicyParams,
    v: PolicyParams,
    t: u32,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
}

impl AdamW {
    pub fn new(template: &PolicyParams, cfg: &TrainConfig) -> Self {
        AdamW {
            m: template.zeros_like(),
            v: template.zeros_like(),
            t: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
            weight_decay: cfg.weight_decay,
        }
    }

    pub fn step(&mut self, params: &mut PolicyParams, grads: &PolicyParams, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut ps = params.tensors_mut();
        let gs = grads.tensors();
        let mut ms = self.m.tensors_mut();
        let mut vs = self.v.tensors_mut();
        for i in 0..ps.len() {
            let p = &mut ps[i].data;
            let g = &gs[i].data;
            let m = &mut ms[i].data;
            let v = &mut vs[i].data;
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * p[j]);
            }
        }
    }
}

/// Scales gradients so their global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut PolicyParams, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if max_norm > 0.0 && norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Batch statistics from one loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct LossStats {
    /// Average cloning loss per labeled step; exactly zero with no labels.
    pub loss: f64,
    pub labeled_steps: usize,
    pub mean_exploit_return: f64,
    /// Fraction of explore episodes labeled informative.
    pub informative_rate: f64,
    /// Fraction of exploit episodes labeled maximal.
    pub maximal_rate: f64,
}

struct GradAcc {
    grads: PolicyParams,
    loss_sum: f64,
    labeled: usize,
    exploit_return_sum: f64,
    exploit_eps: usize,
    informative: usize,
    explore_eps: usize,
    maximal: usize,
}

impl GradAcc {
    fn zeros(template: &PolicyParams) -> Self {
        GradAcc {
            grads: template.zeros_like(),
            loss_sum: 0.0,
            labeled: 0,
            exploit_return_sum: 0.0,
            exploit_eps: 0,
            informative: 0,
            explore_eps: 0,
            maximal: 0,
        }
    }

    fn merge(&mut self, other: GradAcc) {
        self.grads.add_scaled(&other.grads, 1.0);
        self.loss_sum += other.loss_sum;
        self.labeled += other.labeled;
        self.exploit_return_sum += other.exploit_return_sum;
        self.exploit_eps += other.exploit_eps;
        self.informative += other.informative;
        self.explore_eps += other.explore_eps;
        self.maximal += other.maximal;
    }
}

/// Cloning term for one labeled decision: the successor's logits composed
/// with the rollout policy's log probabilities. Returns the per-step loss
/// and pushes the logit gradient.
fn cloning_term(
    phi: &PolicyParams,
    seq: &SeqForward,
    pred: &RecordedPred,
    head_grads: &mut Vec<HeadGrad>,
) -> f64 {
    let z = head_logits(phi, seq, pred.pos, pred.head);
    let combined: Vec<f64> =
        z.iter().zip(&pred.log_p_rollout).map(|(zi, li)| zi + li).collect();
    let mx = combined.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = mx + combined.iter().map(|c| (c - mx).exp()).sum::<f64>().ln();
    let mut d_logits = vec![0.0; combined.len()];
    for (i, &c) in combined.iter().enumerate() {
        d_logits[i] = (c - lse).exp();
    }
    d_logits[pred.action] -= 1.0;
    let loss = lse - combined[pred.action];
    head_grads.push(HeadGrad { pos: pred.pos, head: pred.head, d_logits });
    loss
}

fn labeled(pred: &RecordedPred, rollout: &TrainRollout) -> bool {
    match pred.head {
        Head::Explore => rollout.record.explore_informative[pred.episode],
        Head::Exploit => rollout.record.exploit_maximal[pred.episode],
    }
}

fn rollout_grads(phi: &PolicyParams, rollout: &TrainRollout, acc: &mut GradAcc) {
    // Recorded rollouts respected the context capacity when they were run,
    // so these forwards cannot overflow.
    let trunk = forward_trunk(phi, &rollout.tokens.trunk_tokens)
        .expect("recorded trunk fits the context");
    let mut trunk_hg = Vec::new();
    for pred in &rollout.tokens.trunk_preds {
        if labeled(pred, rollout) {
            acc.loss_sum += cloning_term(phi, &trunk, pred, &mut trunk_hg);
        }
    }
    let cfg = &phi.config;
    let mut prefix = PrefixGrads::zeros(cfg.layers, trunk.seq_len, cfg.hidden);
    let mut any_branch = false;
    for branch in &rollout.tokens.branches {
        let mut branch_hg = Vec::new();
        let fwd = forward_branch(phi, &trunk, branch.prefix_len, &branch.tokens)
            .expect("recorded branch fits the context");
        for pred in &branch.preds {
            if labeled(pred, rollout) {
                acc.loss_sum += cloning_term(phi, &fwd, pred, &mut branch_hg);
            }
        }
        if !branch_hg.is_empty() {
            acc.labeled += branch_hg.len();
            backward(phi, &fwd, &branch_hg, None, &mut acc.grads, Some(&mut prefix));
            any_branch = true;
        }
    }
    acc.labeled += trunk_hg.len();
    if !trunk_hg.is_empty() || any_branch {
        let injected = if any_branch { Some(&prefix) } else { None };
        backward(phi, &trunk, &trunk_hg, injected, &mut acc.grads, None);
    }

    let record = &rollout.record;
    for ep in &record.exploit_episodes {
        acc.exploit_return_sum += ep.ret(1.0);
    }
    acc.exploit_eps += record.exploit_episodes.len();
    acc.informative += record.explore_informative.iter().filter(|&&x| x).count();
    acc.explore_eps += record.explore_informative.len();
    acc.maximal += record.exploit_maximal.iter().filter(|&&x| x).count();
}

/// Loss and parameter gradients for a batch of recorded rollouts, averaged
/// over all labeled steps in the batch.
pub fn batch_loss_and_grads(
    phi: &PolicyParams,
    rollouts: &[TrainRollout],
) -> (PolicyParams, LossStats) {
    let acc = fold_indexed(
        rollouts.len(),
        || GradAcc::zeros(phi),
        |acc, i| rollout_grads(phi, &rollouts[i], acc),
        GradAcc::merge,
    );
    let mut grads = acc.grads;
    let denom = acc.labeled.max(1) as f64;
    grads.scale(1.0 / denom);
    let stats = LossStats {
        loss: acc.loss_sum / denom,
        labeled_steps: acc.labeled,
        mean_exploit_return: acc.exploit_return_sum / acc.exploit_eps.max(1) as f64,
        informative_rate: acc.informative as f64 / acc.explore_eps.max(1) as f64,
        maximal_rate: acc.maximal as f64 / acc.exploit_eps.max(1) as f64,
    };
    (grads, stats)
}

/// Likelihood-ratio loss and gradients for the cumulative-reward control:
/// every step of a rollout is weighted by that rollout's total return minus
/// the batch mean, normalized per step.
pub fn control_loss_and_grads(
    params: &PolicyParams,
    rollouts: &[ControlRollout],
) -> (PolicyParams, f64) {
    let totals: Vec<f64> = rollouts.iter().map(|r| r.returns.iter().sum()).collect();
    let mean = totals.iter().sum::<f64>() / totals.len().max(1) as f64;
    let steps: usize = rollouts.iter().map(|r| r.preds.len()).sum();
    let denom = steps.max(1) as f64;

    struct Acc {
        grads: PolicyParams,
        loss: f64,
    }
    let acc = fold_indexed(
        rollouts.len(),
        || Acc { grads: params.zeros_like(), loss: 0.0 },
        |acc, i| {
            let rollout = &rollouts[i];
            let coeff = (totals[i] - mean) / denom;
            if coeff == 0.0 {
                return;
            }
            let fwd = forward_trunk(params, &rollout.tokens)
                .expect("recorded control rollout fits the context");
            let mut hgs = Vec::with_capacity(rollout.preds.len());
            for pred in &rollout.preds {
                let z = head_logits(params, &fwd, pred.pos, pred.head);
                let mx = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = mx + z.iter().map(|zi| (zi - mx).exp()).sum::<f64>().ln();
                let mut d_logits: Vec<f64> = z.iter().map(|zi| coeff * (zi - lse).exp()).collect();
                d_logits[pred.action] -= coeff;
                acc.loss += coeff * (lse - z[pred.action]);
                hgs.push(HeadGrad { pos: pred.pos, head: pred.head, d_logits });
            }
            backward(params, &fwd, &hgs, None, &mut acc.grads, None);
        },
        |a, b| {
            a.grads.add_scaled(&b.grads, 1.0);
            a.loss += b.loss;
        },
    );
    (acc.grads, acc.loss)
}

/// One row of the training log.
#[derive(Debug, Clone, Copy)]
pub struct TrainLogRow {
    pub update: usize,
    pub loss: f64,
    pub lr: f64,
    pub grad_norm: f64,
    /// Mean exploit return for the main trainer, mean cumulative return for
    /// the control trainer.
    pub mean_return: f64,
    /// Informative-label rate for the main trainer; 1 for the control,
    /// which trains on every step.
    pub informative_rate: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("training diverged at update {update}: loss {loss}")]
    Diverged { update: usize, loss: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Live training state: rollout parameters, successor parameters, and the
/// optimizer. Step it manually or drive it with [`train`].
pub struct TrainState {
    pub theta: PolicyParams,
    pub phi: PolicyParams,
    opt: AdamW,
    pub update: usize,
}

impl TrainState {
    pub fn new(model_cfg: ModelConfig, cfg: &TrainConfig, seed: u64) -> Self {
        let mut rng = stream_rng(seed, "train.init", 0);
        let phi = PolicyParams::init(model_cfg, &mut rng);
        TrainState { theta: phi.clone(), opt: AdamW::new(&phi, cfg), phi, update: 0 }
    }

    /// Collects one batch of rollouts under the rollout parameters, updates
    /// the successor, and syncs the rollout copy when the period elapses.
    pub fn step<D: Domain>(
        &mut self,
        domain: &D,
        cfg: &TrainConfig,
        seed: u64,
    ) -> Result<TrainLogRow, TrainError> {
        let u = self.update;
        let theta = &self.theta;
        let rollouts: Result<Vec<TrainRollout>, ModelError> =
            map_indexed(cfg.batch_size, |i| {
                let idx = (u * cfg.batch_size + i) as u64;
                let mut env_rng = stream_rng(seed, "train.env", idx);
                let mut env = domain.sample(&mut env_rng);
                let mut rng = stream_rng(seed, "train.rollout", idx);
                run_training_rollout(
                    theta,
                    domain,
                    &mut env,
                    cfg.baseline_b,
                    cfg.temperature,
                    cfg.epsilon,
                    &mut rng,
                )
            })
            .into_iter()
            .collect();
        let (mut grads, stats) = batch_loss_and_grads(&self.phi, &rollouts?);
        if !stats.loss.is_finite() || !grads.all_finite() {
            return Err(TrainError::Diverged { update: u, loss: stats.loss });
        }
        let grad_norm = clip_global_norm(&mut grads, cfg.clip_norm);
        let progress = (u as f64 + 0.5) / cfg.updates as f64;
        let lr = schedule_lr(cfg.learning_rate, cfg.warmup_frac, progress);
        self.opt.step(&mut self.phi, &grads, lr);
        if !self.phi.all_finite() {
            return Err(TrainError::Diverged { update: u, loss: stats.loss });
        }
        self.update += 1;
        if cfg.sync_period > 0 && self.update.is_multiple_of(cfg.sync_period) {
            self.theta = self.phi.clone();
        }
        Ok(TrainLogRow {
            update: u,
            loss: stats.loss,
            lr,
            grad_norm,
            mean_return: stats.mean_exploit_return,
            informative_rate: stats.informative_rate,
        })
    }
}

/// Trains explore and exploit policies by conditional action cloning and
/// returns the successor parameters.
pub fn train<D: Domain>(
    domain: &D,
    model_cfg: ModelConfig,
    cfg: &TrainConfig,
    seed: u64,
    mut on_log: impl FnMut(&TrainLogRow),
) -> Result<PolicyParams, TrainError> {
    let mut state = TrainState::new(model_cfg, cfg, seed);
    for _ in 0..cfg.updates {
        let row = state.step(domain, cfg, seed)?;
        on_log(&row);
    }
    Ok(state.phi)
}

/// Live state of the control trainer: a single parameter set.
pub struct ControlTrainState {
    pub params: PolicyParams,
    opt: AdamW,
    pub update: usize,
}

impl ControlTrainState {
    pub fn new(model_cfg: ModelConfig, cfg: &TrainConfig, seed: u64) -> Self {
        let mut rng = stream_rng(seed, "control.init", 0);
        let params = PolicyParams::init(model_cfg, &mut rng);
        ControlTrainState { opt: AdamW::new(&params, cfg), params, update: 0 }
    }

    pub fn step<D: Domain>(
        &mut self,
        domain: &D,
        cfg: &TrainConfig,
        seed: u64,
    ) -> Result<TrainLogRow, TrainError> {
        let u = self.update;
        let params = &self.params;
        let mode = ActionMode::Sample { temperature: cfg.temperature, epsilon: cfg.epsilon };
        let rollouts: Result<Vec<ControlRollout>, ModelError> =
            map_indexed(cfg.batch_size, |i| {
                let idx = (u * cfg.batch_size + i) as u64;
                let mut env_rng = stream_rng(seed, "control.env", idx);
                let mut env = domain.sample(&mut env_rng);
                let mut rng = stream_rng(seed, "control.rollout", idx);
                run_control_rollout(params, domain, &mut env, Head::Exploit, mode, &mut rng, true)
            })
            .into_iter()
            .collect();
        let rollouts = rollouts?;
        let mean_return = rollouts
            .iter()
            .map(|r| r.returns.iter().sum::<f64>())
            .sum::<f64>()
            / rollouts.len().max(1) as f64;
        let (mut grads, loss) = control_loss_and_grads(&self.params, &rollouts);
        if !loss.is_finite() || !grads.all_finite() {
            return Err(TrainError::Diverged { update: u, loss });
        }
        let grad_norm = clip_global_norm(&mut grads, cfg.clip_norm);
        let progress = (u as f64 + 0.5) / cfg.updates as f64;
        let lr = schedule_lr(cfg.learning_rate, cfg.warmup_frac, progress);
        self.opt.step(&mut self.params, &grads, lr);
        if !self.params.all_finite() {
            return Err(TrainError::Diverged { update: u, loss });
        }
        self.update += 1;
        Ok(TrainLogRow {
            update: u,
            loss,
            lr,
            grad_norm,
            mean_return,
            informative_rate: 1.0,
        })
    }
}

/// Trains the cumulative-reward control policy.
pub fn train_control<D: Domain>(
    domain: &D,
    model_cfg: ModelConfig,
    cfg: &TrainConfig,
    seed: u64,
    mut on_log: impl FnMut(&TrainLogRow),
) -> Result<PolicyParams, TrainError> {
    let mut state = ControlTrainState::new(model_cfg, cfg, seed);
    for _ in 0..cfg.updates {
        let row = state.step(domain, cfg, seed)?;
        on_log(&row);
    }
    Ok(state.params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::BanditDomain;
    use crate::darkroom::DarkroomDomain;

    fn tiny_bandit() -> (BanditDomain, PolicyParams) {
        let domain = BanditDomain::new(3, 4, 0.3, 0.5);
        let cfg = ModelConfig::new(domain.spec(), 16, 2, 1);
        let mut rng = stream_rng(5, "training.params", 0);
        (domain, PolicyParams::init(cfg, &mut rng))
    }

    fn tiny_darkroom() -> (DarkroomDomain, PolicyParams) {
        let domain = DarkroomDomain::new(0.5, 3, 2);
        let cfg = ModelConfig::new(domain.spec(), 16, 2, 1);
        let mut rng = stream_rng(5, "training.params", 1);
        (domain, PolicyParams::init(cfg, &mut rng))
    }

    fn sample_rollout<D: Domain>(
        domain: &D,
        theta: &PolicyParams,
        idx: u64,
        b: f64,
    ) -> TrainRollout {
        let mut env_rng = stream_rng(9, "training.env", idx);
        let mut env = domain.sample(&mut env_rng);
        let mut rng = stream_rng(9, "training.rollout", idx);
        run_training_rollout(theta, domain, &mut env, b, 1.0, 0.05, &mut rng).unwrap()
    }

    fn force_labels(rollout: &mut TrainRollout, value: bool) {
        for m in rollout.record.exploit_maximal.iter_mut() {
            *m = value;
        }
        for i in rollout.record.explore_informative.iter_mut() {
            *i = value;
        }
    }

    #[test]
    fn schedule_hits_pinned_points() {
        assert!((schedule_lr(1.0, 0.1, 0.05) - 0.5).abs() < 1e-12);
        assert!((schedule_lr(1.0, 0.1, 0.1) - 1.0).abs() < 1e-12);
        assert!((schedule_lr(1.0, 0.1, 0.55) - 0.5).abs() < 1e-12);
        assert_eq!(schedule_lr(1.0, 0.1, 1.0), 0.0);
        assert_eq!(schedule_lr(1.0, 0.1, 0.0), 0.0);
        // no warmup: pure decay, finite everywhere
        assert!((schedule_lr(2.0, 0.0, 0.5) - 1.0).abs() < 1e-12);
        // peak scales linearly
        assert!((schedule_lr(3e-4, 0.1, 0.1) - 3e-4).abs() < 1e-18);
    }

    #[test]
    fn adamw_zero_gradients_decay_weights_only() {
        let (_, params) = tiny_bandit();
        let cfg = TrainConfig { weight_decay: 0.01, ..TrainConfig::default() };
        let mut opt = AdamW::new(&params, &cfg);
        let mut updated = params.clone();
        opt.step(&mut updated, &params.zeros_like(), 0.1);
        for (a, b) in updated.tensors().iter().zip(params.tensors().iter()) {
            for (x, y) in a.data.iter().zip(b.data.iter()) {
                assert!((x - y * (1.0 - 0.1 * 0.01)).abs() <= 1e-15 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn uniform_rollout_policy_reduces_to_cross_entropy() {
        let (domain, params) = tiny_bandit();
        let mut rollout = sample_rollout(&domain, &params, 0, 0.0);
        force_labels(&mut rollout, true);
        let actions = domain.spec().action_count;
        let uniform = vec![-(actions as f64).ln(); actions];
        for pred in rollout.tokens.trunk_preds.iter_mut() {
            pred.log_p_rollout = uniform.clone();
        }
        let (_, stats) = batch_loss_and_grads(&params, &[rollout.clone()]);

        // with a constant shift inside the softmax, the composed loss is the
        // plain cross-entropy of the successor's own logits
        let trunk = forward_trunk(&params, &rollout.tokens.trunk_tokens).unwrap();
        let mut expected = 0.0;
        for pred in &rollout.tokens.trunk_preds {
            let z = head_logits(&params, &trunk, pred.pos, pred.head);
            let mx = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + z.iter().map(|zi| (zi - mx).exp()).sum::<f64>().ln();
            expected += lse - z[pred.action];
        }
        expected /= rollout.tokens.trunk_preds.len() as f64;
        assert!((stats.loss - expected).abs() < 1e-12);
    }

    #[test]
    fn certain_successor_gives_vanishing_loss() {
        let (domain, mut params) = tiny_bandit();
        let mut rollout = sample_rollout(&domain, &params, 1, 0.0);
        force_labels(&mut rollout, false);
        rollout.record.explore_informative[0] = true;
        let pred = rollout
            .tokens
            .trunk_preds
            .iter_mut()
            .find(|p| p.head == Head::Explore && p.episode == 0)
            .unwrap();
        let actions = domain.spec().action_count;
        pred.log_p_rollout = vec![-(actions as f64).ln(); actions];
        let action = pred.action;
        params.explore_b.data[action] += 60.0;
        let (_, stats) = batch_loss_and_grads(&params, &[rollout]);
        assert_eq!(stats.labeled_steps, 1);
        assert!(stats.loss < 1e-9, "near-certain prediction should cost ~0, got {}", stats.loss);
    }

    #[test]
    fn unlabeled_batch_gives_exactly_zero_loss_and_grads() {
        let (domain, params) = tiny_bandit();
        let mut rollout = sample_rollout(&domain, &params, 2, 0.0);
        force_labels(&mut rollout, false);
        let (grads, stats) = batch_loss_and_grads(&params, &[rollout]);
        assert_eq!(stats.loss, 0.0);
        assert_eq!(stats.labeled_steps, 0);
        assert_eq!(grads.global_norm(), 0.0);
    }

    #[test]
    fn sync_period_one_keeps_rollout_copy_current() {
        let (domain, _) = tiny_bandit();
        let model_cfg = ModelConfig::new(domain.spec(), 16, 2, 1);
        // a hugely negative baseline labels every step, guaranteeing updates
        let cfg = TrainConfig {
            updates: 3,
            batch_size: 2,
            sync_period: 1,
            baseline_b: -1e6,
            ..TrainConfig::default()
        };
        let mut state = TrainState::new(model_cfg.clone(), &cfg, 11);
        for _ in 0..3 {
            state.step(&domain, &cfg, 11).unwrap();
            assert_eq!(state.theta, state.phi);
        }

        let cfg_lagged = TrainConfig { sync_period: 3, ..cfg };
        let mut state = TrainState::new(model_cfg, &cfg_lagged, 11);
        state.step(&domain, &cfg_lagged, 11).unwrap();
        assert_ne!(state.theta, state.phi, "rollout copy should lag until the sync");
        state.step(&domain, &cfg_lagged, 11).unwrap();
        state.step(&domain, &cfg_lagged, 11).unwrap();
        assert_eq!(state.theta, state.phi, "third update should sync");
    }

    #[test]
    fn cloning_gradients_match_finite_differences() {
        let (domain, params) = tiny_darkroom();
        let mut rollouts: Vec<TrainRollout> = (0..2)
            .map(|i| {
                let mut r = sample_rollout(&domain, &params, 10 + i, 0.0);
                force_labels(&mut r, true);
                r
            })
            .collect();
        // leave one episode unlabeled so the masking path is exercised too
        rollouts[0].record.explore_informative[0] = false;
        let (grads, stats) = batch_loss_and_grads(&params, &rollouts);
        assert!(stats.labeled_steps > 0);

        let h = 1e-4;
        let mut worst = 0.0f64;
        let n_tensors = params.tensors().len();
        for ti in 0..n_tensors {
            let len = params.tensors()[ti].data.len();
            for &j in &[0, len / 2, len - 1] {
                let mut plus = params.clone();
                plus.tensors_mut()[ti].data[j] += h;
                let (_, s_plus) = batch_loss_and_grads(&plus, &rollouts);
                let mut minus = params.clone();
                minus.tensors_mut()[ti].data[j] -= h;
                let (_, s_minus) = batch_loss_and_grads(&minus, &rollouts);
                let fd = (s_plus.loss - s_minus.loss) / (2.0 * h);
                let ga = grads.tensors()[ti].data[j];
                let rel = (ga - fd).abs() / (ga.abs() + fd.abs()).max(1e-3);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4, "worst relative gradient error {worst}");
    }

    #[test]
    fn control_gradients_match_finite_differences() {
        let (domain, params) = tiny_darkroom();
        let rollouts: Vec<ControlRollout> = (0..3)
            .map(|i| {
                let mut env_rng = stream_rng(9, "training.env", 20 + i);
                let mut env = domain.sample(&mut env_rng);
                let mut rng = stream_rng(9, "training.rollout", 20 + i);
                run_control_rollout(
                    &params,
                    &domain,
                    &mut env,
                    Head::Exploit,
                    ActionMode::Sample { temperature: 1.0, epsilon: 0.05 },
                    &mut rng,
                    true,
                )
                .unwrap()
            })
            .collect();
        let (grads, _) = control_loss_and_grads(&params, &rollouts);

        let h = 1e-4;
        let mut worst = 0.0f64;
        let n_tensors = params.tensors().len();
        for ti in 0..n_tensors {
            let len = params.tensors()[ti].data.len();
            for &j in &[0, len - 1] {
                let mut plus = params.clone();
                plus.tensors_mut()[ti].data[j] += h;
                let (_, l_plus) = control_loss_and_grads(&plus, &rollouts);
                let mut minus = params.clone();
                minus.tensors_mut()[ti].data[j] -= h;
                let (_, l_minus) = control_loss_and_grads(&minus, &rollouts);
                let fd = (l_plus - l_minus) / (2.0 * h);
                let ga = grads.tensors()[ti].data[j];
                let rel = (ga - fd).abs() / (ga.abs() + fd.abs()).max(1e-3);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4, "worst relative gradient error {worst}");
    }

    #[test]
    fn explosive_learning_rate_reports_divergence() {
        let (domain, _) = tiny_bandit();
        let model_cfg = ModelConfig::new(domain.spec(), 16, 2, 1);
        let cfg = TrainConfig {
            updates: 60,
            batch_size: 2,
            learning_rate: 1e12,
            warmup_frac: 0.0,
            baseline_b: -1e6,
            ..TrainConfig::default()
        };
        let err = train(&domain, model_cfg, &cfg, 13, |_| {}).unwrap_err();
        assert!(matches!(err, TrainError::Diverged { .. }), "got {err:?}");
    }

    #[test]
    fn training_is_deterministic() {
        let (domain, _) = tiny_bandit();
        let model_cfg = ModelConfig::new(domain.spec(), 16, 2, 1);
        let cfg = TrainConfig {
            updates: 3,
            batch_size: 4,
            baseline_b: -1e6,
            ..TrainConfig::default()
        };
        let run = || {
            let mut losses = Vec::new();
            let params =
                train(&domain, model_cfg.clone(), &cfg, 17, |row| losses.push(row.loss)).unwrap();
            (params, losses)
        };
        let (p1, l1) = run();
        let (p2, l2) = run();
        assert_eq!(l1, l2);
        assert_eq!(p1, p2);
    }
}
