//! Post-training combination of the two policies.
//!
//! The explore and exploit policies are welded into one inference policy by
//! a single integer k: explore for the first k episodes, exploit for the
//! rest. k is chosen by sweeping every value on held-out environments and
//! keeping the one with the highest mean cumulative reward, preferring the
//! smallest k on ties.

use crate::batch::{fold_indexed, mean_std_indexed};
use crate::env::Domain;
use crate::model::params::PolicyParams;
use crate::rng::stream_rng;
use crate::rollout::run_combined_rollout;

/// Mean and spread of cumulative reward at one k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KPoint {
    pub k: usize,
    pub mean: f64,
    pub std: f64,
    pub n_envs: usize,
}

/// Full sweep over k with the winner.
#[derive(Debug, Clone, PartialEq)]
pub struct KCurve {
    /// One point per k in 0..=n, in order.
    pub points: Vec<KPoint>,
    pub k_star: usize,
}

/// Sweeps k from 0 to `n` inclusive, scoring each with the mean of
/// `total_reward(k, env_index)` over `eval_envs` environments. Ties go to
/// the smallest k.
pub fn select_k<F>(n: usize, eval_envs: usize, total_reward: F) -> KCurve
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let mut points = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let (mean, std) = mean_std_indexed(eval_envs, |i| total_reward(k, i));
        points.push(KPoint { k, mean, std, n_envs: eval_envs });
    }
    let mut k_star = 0;
    for p in &points {
        if p.mean > points[k_star].mean {
            k_star = p.k;
        }
    }
    KCurve { points, k_star }
}

/// Policy-backed k sweep. Environment `i` is identical across every k, so
/// the sweep compares k values on common random numbers; per-step noise
/// gets its own stream per (k, environment) pair.
pub fn select_k_for_policy<D: Domain>(
    params: &PolicyParams,
    domain: &D,
    eval_envs: usize,
    seed: u64,
) -> KCurve {
    let n = domain.spec().episodes_per_rollout;
    select_k(n, eval_envs, |k, i| {
        let mut env = domain.sample(&mut stream_rng(seed, "selectk.env", i as u64));
        let mut rng = stream_rng(seed, "selectk.noise", (k * eval_envs + i) as u64);
        let returns = run_combined_rollout(params, domain, &mut env, k, &mut rng)
            .expect("evaluation rollout fits the context");
        returns.iter().sum()
    })
}

/// Evaluation summary over held-out environments.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub mean_total: f64,
    pub std_total: f64,
    /// Mean return of each episode position across environments.
    pub per_episode_mean: Vec<f64>,
    pub n_envs: usize,
}

/// Aggregates per-episode returns from `rollout_returns(env_index)` over
/// `eval_envs` environments.
pub fn evaluate<F>(n_episodes: usize, eval_envs: usize, rollout_returns: F) -> EvalSummary
where
    F: Fn(usize) -> Vec<f64> + Sync,
{
    assert!(eval_envs > 0, "evaluation needs at least one environment");
    struct Acc {
        per_episode: Vec<f64>,
        total: f64,
        total_sq: f64,
    }
    let acc = fold_indexed(
        eval_envs,
        || Acc { per_episode: vec![0.0; n_episodes], total: 0.0, total_sq: 0.0 },
        |acc, i| {
            let returns = rollout_returns(i);
            assert_eq!(returns.len(), n_episodes, "rollout must cover every episode");
            let mut total = 0.0;
            for (slot, r) in acc.per_episode.iter_mut().zip(&returns) {
                *slot += r;
                total += r;
            }
            acc.total += total;
            acc.total_sq += total * total;
        },
        |a, b| {
            for (x, y) in a.per_episode.iter_mut().zip(&b.per_episode) {
                *x += y;
            }
            a.total += b.total;
            a.total_sq += b.total_sq;
        },
    );
    let n = eval_envs as f64;
    let mean_total = acc.total / n;
    let var = (acc.total_sq / n - mean_total * mean_total).max(0.0);
    EvalSummary {
        mean_total,
        std_total: var.sqrt(),
        per_episode_mean: acc.per_episode.into_iter().map(|s| s / n).collect(),
        n_envs: eval_envs,
    }
}

/// Greedy evaluation of the combined policy at a fixed k on fresh held-out
/// streams.
pub fn evaluate_policy<D: Domain>(
    params: &PolicyParams,
    domain: &D,
    k: usize,
    eval_envs: usize,
    seed: u64,
) -> EvalSummary {
    let n = domain.spec().episodes_per_rollout;
    evaluate(n, eval_envs, |i| {
        let mut env = domain.sample(&mut stream_rng(seed, "eval.env", i as u64));
        let mut rng = stream_rng(seed, "eval.noise", i as u64);
        run_combined_rollout(params, domain, &mut env, k, &mut rng)
            .expect("evaluation rollout fits the context")
    })
}
