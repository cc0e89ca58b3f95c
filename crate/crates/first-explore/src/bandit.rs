//! Bandits with one fixed arm.
//!
//! Arm 0 pays exactly `mu1` on every pull. The remaining arms have means
//! drawn N(0,1) per instance and add fresh Gaussian noise to each pull.
//! Each pull is its own length-1 episode; the observation is a constant
//! placeholder because the environment is stateless.

use crate::env::{Domain, Env, EnvSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct BanditDomain {
    spec: EnvSpec,
    pub mu1: f64,
    pub noise_variance: f64,
}

impl BanditDomain {
    pub fn new(arms: usize, pulls: usize, mu1: f64, noise_variance: f64) -> Self {
        assert!(noise_variance >= 0.0);
        Self {
            spec: EnvSpec::new(
                format!("{arms}-armed bandit, arm 0 fixed"),
                arms,
                1,
                1,
                pulls,
                1.0,
                false,
            ),
            mu1,
            noise_variance,
        }
    }

    /// The full-scale distribution: 10 arms, 100 pulls, noise variance 1/2.
    pub fn standard(mu1: f64) -> Self {
        Self::new(10, 100, mu1, 0.5)
    }
}

impl Domain for BanditDomain {
    type Instance = BanditEnv;

    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> BanditEnv {
        let mut arm_means = vec![self.mu1];
        for _ in 1..self.spec.action_count {
            arm_means.push(rng.sample(StandardNormal));
        }
        BanditEnv { arm_means, noise_sd: self.noise_variance.sqrt() }
    }
}

#[derive(Debug, Clone)]
pub struct BanditEnv {
    /// True per-arm means; index 0 is the fixed arm.
    pub arm_means: Vec<f64>,
    noise_sd: f64,
}

impl BanditEnv {
    /// Instance with explicit arm means, for tests and analytic checks.
    pub fn with_means(arm_means: Vec<f64>, noise_variance: f64) -> Self {
        assert!(!arm_means.is_empty());
        BanditEnv { arm_means, noise_sd: noise_variance.sqrt() }
    }

    /// Reward for pulling `arm`: exactly the fixed value for arm 0, the
    /// instance mean plus fresh noise for the rest.
    pub fn pull(&self, arm: usize, rng: &mut ChaCha8Rng) -> f64 {
        assert!(arm < self.arm_means.len(), "arm {arm} out of range");
        if arm == 0 {
            self.arm_means[0]
        } else {
            self.arm_means[arm] + self.noise_sd * rng.sample::<f64, _>(StandardNormal)
        }
    }

    /// Per-pull value of always pulling the best arm.
    pub fn oracle_value(&self) -> f64 {
        self.arm_means.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Env for BanditEnv {
    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![0.0]
    }

    fn step(&mut self, action: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
        (vec![0.0], self.pull(action, rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::mean_std_indexed;
    use crate::rng::stream_rng;

    #[test]
    fn fixed_arm_pays_exactly_mu1() {
        let domain = BanditDomain::standard(0.5);
        let mut rng = stream_rng(1, "test.bandit", 0);
        let env = domain.sample(&mut rng);
        for _ in 0..100 {
            assert_eq!(env.pull(0, &mut rng), 0.5);
        }
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn out_of_range_arm_faults() {
        let domain = BanditDomain::standard(0.5);
        let mut rng = stream_rng(1, "test.bandit", 1);
        let env = domain.sample(&mut rng);
        env.pull(10, &mut rng);
    }

    #[test]
    fn sampled_means_center_on_zero() {
        let domain = BanditDomain::standard(0.5);
        let (mean, _) = mean_std_indexed(1_000_000, |i| {
            let mut rng = stream_rng(2, "test.bandit.means", i as u64);
            let env = domain.sample(&mut rng);
            env.arm_means[1..].iter().sum::<f64>() / 9.0
        });
        assert!(mean.abs() < 0.005, "mean of sampled means = {mean}");
    }

    #[test]
    fn pull_noise_has_declared_mean_and_variance() {
        let domain = BanditDomain::standard(0.5);
        let mut rng = stream_rng(3, "test.bandit.noise", 0);
        let env = domain.sample(&mut rng);
        let arm = 4;
        let (mean, std) = mean_std_indexed(1_000_000, |i| {
            let mut rng = stream_rng(3, "test.bandit.pulls", i as u64);
            env.pull(arm, &mut rng)
        });
        assert!((mean - env.arm_means[arm]).abs() < 0.01);
        assert!((std * std - 0.5).abs() < 0.01, "pull variance = {}", std * std);
    }

    #[test]
    fn oracle_value_reference_points() {
        let env = BanditEnv { arm_means: vec![0.5, -1.0, -0.2], noise_sd: 0.0 };
        assert_eq!(env.oracle_value(), 0.5);
        let env = BanditEnv { arm_means: vec![0.5, 2.0, -0.2], noise_sd: 0.0 };
        assert_eq!(env.oracle_value(), 2.0);
    }

    #[test]
    fn mean_oracle_matches_direct_mc() {
        // E[max(0.5, max of 9 N(0,1))], estimated through the domain and
        // directly from normals; both see 10^5 draws.
        let domain = BanditDomain::standard(0.5);
        let (via_env, _) = mean_std_indexed(100_000, |i| {
            let mut rng = stream_rng(4, "test.bandit.oracle", i as u64);
            domain.sample(&mut rng).oracle_value()
        });
        let (direct, _) = mean_std_indexed(100_000, |i| {
            let mut rng = stream_rng(5, "test.bandit.direct", i as u64);
            (0..9)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .fold(0.5f64, f64::max)
        });
        assert!((via_env - direct).abs() < 0.01, "{via_env} vs {direct}");
    }

    #[test]
    fn deceptive_and_plain_differ_only_in_fixed_arm() {
        let mut rng_a = stream_rng(6, "test.bandit.pair", 0);
        let mut rng_b = stream_rng(6, "test.bandit.pair", 0);
        let a = BanditDomain::standard(0.5).sample(&mut rng_a);
        let b = BanditDomain::standard(0.0).sample(&mut rng_b);
        assert_eq!(a.arm_means[1..], b.arm_means[1..]);
        assert_eq!(a.arm_means[0], 0.5);
        assert_eq!(b.arm_means[0], 0.0);
    }
}
