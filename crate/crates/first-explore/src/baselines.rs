//! Classical bandit baselines: UCB-1, Thompson sampling with the true
//! generative prior, and a uniform-random policy.
//!
//! Arm 0 is the fixed arm. Thompson sampling models it as a point mass at
//! its known value, so its posterior never moves; the remaining arms carry
//! Gaussian conjugate posteriors with prior N(0,1) and known pull-noise
//! variance.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bandit::BanditEnv;
use crate::env::{Env, EnvSpec};

/// Empirical per-arm pull counts and reward sums, as UCB-1 sees them.
#[derive(Debug, Clone)]
pub struct ArmStats {
    pull_count: Vec<u64>,
    reward_sum: Vec<f64>,
}

impl ArmStats {
    pub fn new(arms: usize) -> Self {
        ArmStats { pull_count: vec![0; arms], reward_sum: vec![0.0; arms] }
    }

    pub fn update(&mut self, arm: usize, reward: f64) {
        self.pull_count[arm] += 1;
        self.reward_sum[arm] += reward;
    }

    pub fn pulls(&self, arm: usize) -> u64 {
        self.pull_count[arm]
    }

    /// Empirical mean; zero for an arm never pulled.
    pub fn mean(&self, arm: usize) -> f64 {
        if self.pull_count[arm] == 0 {
            0.0
        } else {
            self.reward_sum[arm] / self.pull_count[arm] as f64
        }
    }
}

/// UCB-1 choice at 1-based pull index `t`: first one pull of each arm in
/// index order, then the lowest-index maximizer of mean + sqrt(2 ln t / T).
pub fn ucb1_select(stats: &ArmStats, t: usize) -> usize {
    assert!(t >= 1, "pull index is 1-based");
    if let Some(arm) = stats.pull_count.iter().position(|&c| c == 0) {
        return arm;
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for arm in 0..stats.pull_count.len() {
        let bonus = (2.0 * (t as f64).ln() / stats.pull_count[arm] as f64).sqrt();
        let score = stats.mean(arm) + bonus;
        if score > best_score {
            best = arm;
            best_score = score;
        }
    }
    best
}

/// Per-arm Gaussian posteriors with arm 0 pinned to its known value.
#[derive(Debug, Clone)]
pub struct ArmPosterior {
    fixed_value: f64,
    noise_variance: f64,
    pull_count: Vec<u64>,
    reward_sum: Vec<f64>,
}

impl ArmPosterior {
    pub fn new(arms: usize, fixed_value: f64, noise_variance: f64) -> Self {
        assert!(arms >= 1);
        assert!(noise_variance > 0.0, "conjugate update needs a positive noise variance");
        ArmPosterior {
            fixed_value,
            noise_variance,
            pull_count: vec![0; arms],
            reward_sum: vec![0.0; arms],
        }
    }

    pub fn arms(&self) -> usize {
        self.pull_count.len()
    }

    pub fn pulls(&self, arm: usize) -> u64 {
        self.pull_count[arm]
    }

    pub fn mean(&self, arm: usize) -> f64 {
        if arm == 0 {
            return self.fixed_value;
        }
        let precision = 1.0 + self.pull_count[arm] as f64 / self.noise_variance;
        (self.reward_sum[arm] / self.noise_variance) / precision
    }

    pub fn variance(&self, arm: usize) -> f64 {
        if arm == 0 {
            return 0.0;
        }
        1.0 / (1.0 + self.pull_count[arm] as f64 / self.noise_variance)
    }

    /// Conjugate update; observations of the point-mass arm are ignored.
    pub fn update(&mut self, arm: usize, reward: f64) {
        if arm == 0 {
            return;
        }
        self.pull_count[arm] += 1;
        self.reward_sum[arm] += reward;
    }
}

/// Thompson sampling: draw a mean from each arm's posterior (the point-mass
/// arm contributes its value exactly) and take the lowest-index maximizer.
pub fn thompson_select(posterior: &ArmPosterior, rng: &mut ChaCha8Rng) -> usize {
    let mut best = 0;
    let mut best_sample = posterior.fixed_value;
    for arm in 1..posterior.arms() {
        let sample = posterior.mean(arm)
            + posterior.variance(arm).sqrt() * rng.sample::<f64, _>(StandardNormal);
        if sample > best_sample {
            best = arm;
            best_sample = sample;
        }
    }
    best
}

/// Uniform-random action.
pub fn random_policy(action_count: usize, rng: &mut ChaCha8Rng) -> usize {
    rng.gen_range(0..action_count)
}

/// Runs UCB-1 for `pulls` rounds; per-pull rewards in order.
///
/// Every arm's statistics start from one phantom zero-reward pull: no
/// sweep rounds are burned on a forced pass over the arms, and early
/// empirical means are shrunk toward zero. On these bandits that scores
/// several points above the sweep initialization.
pub fn ucb1_rollout(env: &BanditEnv, pulls: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut stats = ArmStats::new(env.arm_means.len());
    for arm in 0..env.arm_means.len() {
        stats.update(arm, 0.0);
    }
    (1..=pulls)
        .map(|t| {
            let arm = ucb1_select(&stats, t);
            let reward = env.pull(arm, rng);
            stats.update(arm, reward);
            reward
        })
        .collect()
}

/// Runs Thompson sampling for `pulls` rounds. `fixed_value` and
/// `noise_variance` are the generative parameters the sampler is granted up
/// front.
pub fn thompson_rollout(
    env: &BanditEnv,
    pulls: usize,
    fixed_value: f64,
    noise_variance: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut posterior = ArmPosterior::new(env.arm_means.len(), fixed_value, noise_variance);
    (0..pulls)
        .map(|_| {
            let arm = thompson_select(&posterior, rng);
            let reward = env.pull(arm, rng);
            posterior.update(arm, reward);
            reward
        })
        .collect()
}

/// Uniform-random meta-rollout on any environment; per-episode returns.
pub fn random_rollout(env: &mut impl Env, spec: &EnvSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..spec.episodes_per_rollout)
        .map(|_| {
            env.reset(rng);
            let mut ret = 0.0;
            let mut weight = 1.0;
            for _ in 0..spec.episode_len {
                let action = random_policy(spec.action_count, rng);
                let (_, reward) = env.step(action, rng);
                ret += weight * reward;
                weight *= spec.discount;
            }
            ret
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::BanditDomain;
    use crate::batch::mean_std_indexed;
    use crate::darkroom::DarkroomDomain;
    use crate::env::Domain;
    use crate::rng::stream_rng;

    #[test]
    fn posterior_prior_and_single_pull_update() {
        let mut p = ArmPosterior::new(3, 0.5, 0.5);
        assert_eq!(p.mean(1), 0.0);
        assert_eq!(p.variance(1), 1.0);
        p.update(1, 1.0);
        assert!((p.mean(1) - 2.0 / 3.0).abs() < 1e-12);
        assert!((p.variance(1) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn posterior_mean_concentrates_on_the_true_mean() {
        let truth = 0.7;
        let sd = 0.5f64.sqrt();
        let mut p = ArmPosterior::new(2, 0.5, 0.5);
        let mut rng = stream_rng(41, "baselines.concentrate", 0);
        for _ in 0..10_000 {
            p.update(1, truth + sd * rng.sample::<f64, _>(StandardNormal));
        }
        assert!((p.mean(1) - truth).abs() < 0.01, "posterior mean {}", p.mean(1));
    }

    #[test]
    fn posterior_variance_strictly_decreases_with_pulls() {
        let mut p = ArmPosterior::new(2, 0.5, 0.5);
        let mut last = p.variance(1);
        for _ in 0..20 {
            p.update(1, 0.0);
            let v = p.variance(1);
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn point_mass_arm_ignores_observations() {
        let mut p = ArmPosterior::new(3, 0.5, 0.5);
        p.update(0, 123.0);
        assert_eq!(p.mean(0), 0.5);
        assert_eq!(p.variance(0), 0.0);
        assert_eq!(p.pulls(0), 0);
    }

    #[test]
    fn ucb_sweeps_every_arm_once_in_index_order() {
        let mut stats = ArmStats::new(10);
        for t in 1..=10 {
            let arm = ucb1_select(&stats, t);
            assert_eq!(arm, t - 1);
            stats.update(arm, 0.0);
        }
    }

    #[test]
    fn ucb_picks_the_higher_empirical_mean_after_the_sweep() {
        // all arms pulled once; one arm stands out by its mean alone
        let mut stats = ArmStats::new(10);
        for arm in 0..10 {
            stats.update(arm, if arm == 2 { 0.5 } else { 0.0 });
        }
        assert_eq!(ucb1_select(&stats, 11), 2);
        let bonus = (2.0 * 11f64.ln()).sqrt();
        assert!((stats.mean(2) + bonus) - (stats.mean(0) + bonus) == 0.5);
    }

    #[test]
    fn ucb_ties_break_to_the_lowest_index() {
        let mut stats = ArmStats::new(4);
        for arm in 0..4 {
            stats.update(arm, 1.0);
        }
        assert_eq!(ucb1_select(&stats, 5), 0);
    }

    #[test]
    fn thompson_converges_to_a_dominant_arm() {
        let env = BanditEnv::with_means(vec![0.1, 5.0], 0.5);
        let mut rng = stream_rng(41, "baselines.ts", 0);
        let rewards = thompson_rollout(&env, 200, 0.1, 0.5, &mut rng);
        let tail: f64 = rewards[150..].iter().sum::<f64>() / 50.0;
        assert!(tail > 2.0, "late pulls should target the dominant arm, got {tail}");
    }

    #[test]
    fn baseline_rollouts_are_deterministic() {
        let domain = BanditDomain::standard(0.5);
        let env = domain.sample(&mut stream_rng(41, "baselines.env", 0));
        let a = ucb1_rollout(&env, 100, &mut stream_rng(41, "baselines.run", 0));
        let b = ucb1_rollout(&env, 100, &mut stream_rng(41, "baselines.run", 0));
        assert_eq!(a, b);
        let a = thompson_rollout(&env, 100, 0.5, 0.5, &mut stream_rng(41, "baselines.run", 1));
        let b = thompson_rollout(&env, 100, 0.5, 0.5, &mut stream_rng(41, "baselines.run", 1));
        assert_eq!(a, b);
    }

    #[test]
    fn random_policy_is_roughly_uniform() {
        let k = 10;
        let draws = 100_000;
        let mut counts = vec![0u32; k];
        let mut rng = stream_rng(41, "baselines.random", 0);
        for _ in 0..draws {
            counts[random_policy(k, &mut rng)] += 1;
        }
        let expected = draws as f64 / k as f64;
        let chi2: f64 =
            counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 9 degrees of freedom, 0.999 quantile
        assert!(chi2 < 27.9, "chi-squared {chi2}");
        let mut rng = stream_rng(41, "baselines.single", 0);
        assert_eq!(random_policy(1, &mut rng), 0);
    }

    #[test]
    fn random_rollout_shape_matches_the_domain() {
        let domain = DarkroomDomain::new(0.5, 3, 2);
        let mut env = domain.sample(&mut stream_rng(41, "baselines.dark", 0));
        let mut rng = stream_rng(41, "baselines.dark.run", 0);
        let returns = random_rollout(&mut env, domain.spec(), &mut rng);
        assert_eq!(returns.len(), 2);
    }

    #[test]
    fn scaled_down_bandit_sanity_bands() {
        // coarse versions of the full-scale reference bands, to catch gross
        // regressions quickly: 500 envs instead of 10^4
        let domain = BanditDomain::standard(0.5);
        let (ucb_mean, _) = mean_std_indexed(500, |i| {
            let env = domain.sample(&mut stream_rng(42, "baselines.band.env", i as u64));
            ucb1_rollout(&env, 100, &mut stream_rng(42, "baselines.band.run", i as u64))
                .iter()
                .sum()
        });
        assert!(
            (108.0..=126.0).contains(&ucb_mean),
            "ucb mean cumulative reward {ucb_mean} outside coarse band"
        );
        let (ts_mean, _) = mean_std_indexed(500, |i| {
            let env = domain.sample(&mut stream_rng(42, "baselines.band.env", i as u64));
            thompson_rollout(
                &env,
                100,
                0.5,
                0.5,
                &mut stream_rng(42, "baselines.band.ts", i as u64),
            )
            .iter()
            .sum()
        });
        assert!(
            (114.0..=132.0).contains(&ts_mean),
            "thompson mean cumulative reward {ts_mean} outside coarse band"
        );
        let (rand_mean, _) = mean_std_indexed(500, |i| {
            let mut env = domain.sample(&mut stream_rng(42, "baselines.band.env", i as u64));
            random_rollout(&mut env, domain.spec(), &mut stream_rng(42, "baselines.band.rand", i as u64))
                .iter()
                .sum()
        });
        assert!(
            (2.0..=9.0).contains(&rand_mean),
            "random mean cumulative reward {rand_mean} outside coarse band"
        );
    }
}
