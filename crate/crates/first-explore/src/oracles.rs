//! Closed-form reference values and Monte Carlo checks.
//!
//! Each formula here has a matching abstract sampler so [`mc_check`] can
//! verify it against simulation. The samplers model the reward processes
//! directly (object values, goal lotteries), not the full environments; the
//! environment crates get their own simulation tests.

use crate::batch::fold_indexed;
use crate::rng::stream_rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Expected total reward from visiting one uniform `U[rho, 2)` object and
/// returning to it in each of `n` later episodes iff its value is positive.
///
/// First visit contributes the mean `(rho + 2) / 2`; each revisit contributes
/// `P(v > 0) * E[v | v > 0] = 2 / (2 - rho)`.
pub fn expected_revisit_value(rho: f64, n: f64) -> f64 {
    assert!(rho < 2.0, "object values live in [rho, 2), need rho < 2");
    assert!(n >= 0.0);
    (rho + 2.0) / 2.0 + n * 2.0 / (2.0 - rho)
}

/// Number of revisit episodes at which [`expected_revisit_value`] crosses
/// zero: visiting pays off iff more than `(rho^2 - 4) / 4` revisits remain.
pub fn revisit_threshold(rho: f64) -> f64 {
    assert!(rho < 2.0);
    (rho * rho - 4.0) / 4.0
}

/// Expected return of exploring 9 distinct cells of the 81-cell room in one
/// episode and then revisiting every discovered positive object for `n`
/// episodes. Each of the 8 objects lands in the explored area with
/// probability 9/81, so the bound is `8/9` of the per-object revisit value.
pub fn myopic_optimal_bound(rho: f64, n: f64) -> f64 {
    8.0 / 9.0 * expected_revisit_value(rho, n)
}

/// Expected total reward of the threshold policy on the ray-maze goal
/// lottery: `goals` unknown goal cells, each a treasure (+1 every visit) with
/// probability `p` and otherwise a trap (-1 every visit); one goal visit per
/// episode; first triggered goal ends the episode's reward.
///
/// The policy visits a new goal while the myopic value of doing so,
/// `(2p - 1) + p * remaining`, is positive and unknown goals remain; once a
/// treasure is known it revisits it every remaining episode; otherwise it
/// stays home for 0.
pub fn raymaze_optimal_bound(p: f64, episodes: usize, goals: usize) -> f64 {
    assert!((0.0..=1.0).contains(&p));
    fn value(p: f64, m: usize, unknown: usize, treasure_known: bool) -> f64 {
        if m == 0 {
            return 0.0;
        }
        if treasure_known {
            return m as f64;
        }
        if unknown == 0 || (2.0 * p - 1.0) + p * (m - 1) as f64 <= 0.0 {
            return 0.0;
        }
        (2.0 * p - 1.0) + p * (m - 1) as f64 + (1.0 - p) * value(p, m - 1, unknown - 1, false)
    }
    value(p, episodes, goals, false)
}

/// One Monte Carlo comparison of a formula against its sampler.
#[derive(Debug, Clone)]
pub struct McReport {
    pub label: String,
    pub expected: f64,
    pub estimate: f64,
    pub n_samples: usize,
    pub tol: f64,
}

impl McReport {
    pub fn passed(&self) -> bool {
        (self.estimate - self.expected).abs() <= self.tol
    }
}

impl std::fmt::Display for McReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: formula {:.6} vs mc {:.6} (n={}, tol={}) {}",
            self.label,
            self.expected,
            self.estimate,
            self.n_samples,
            self.tol,
            if self.passed() { "ok" } else { "MISMATCH" }
        )
    }
}

/// Estimates `E[sample]` with `n_samples` draws and compares to `expected`.
///
/// Each draw gets its own random stream, so the estimate is independent of
/// chunking and thread count.
pub fn mc_check<F>(label: &str, expected: f64, n_samples: usize, tol: f64, seed: u64, sample: F) -> McReport
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync + Send,
{
    assert!(n_samples > 0);
    assert!(tol > 0.0);
    let label_owned = format!("mc.{label}");
    let sum = fold_indexed(
        n_samples,
        || 0.0f64,
        |acc, i| {
            let mut rng = stream_rng(seed, &label_owned, i as u64);
            *acc += sample(&mut rng);
        },
        |a, b| *a += b,
    );
    McReport {
        label: label.to_string(),
        expected,
        estimate: sum / n_samples as f64,
        n_samples,
        tol,
    }
}

/// Sampler for [`expected_revisit_value`]: one object draw plus `n`
/// conditional revisits. Fractional `n` scales the revisit payout, which is
/// what lets the same sampler verify [`revisit_threshold`] at the crossing.
pub fn sample_revisit_value(rho: f64, n: f64, rng: &mut ChaCha8Rng) -> f64 {
    let v = rng.gen_range(rho..2.0);
    if v > 0.0 {
        v + n * v
    } else {
        v
    }
}

/// Sampler for [`myopic_optimal_bound`]: each of the 8 objects independently
/// falls in the 9 explored cells with probability 1/9.
pub fn sample_myopic_exploration(rho: f64, n: f64, rng: &mut ChaCha8Rng) -> f64 {
    let mut total = 0.0;
    for _ in 0..8 {
        if rng.gen_range(0..81) < 9 {
            total += sample_revisit_value(rho, n, rng);
        }
    }
    total
}

/// Sampler for [`raymaze_optimal_bound`]: rolls the goal lottery under the
/// same threshold policy the recursion evaluates.
pub fn sample_threshold_policy(p: f64, episodes: usize, goals: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut unknown = goals;
    let mut treasure_known = false;
    let mut total = 0.0;
    for ep in 0..episodes {
        let remaining = (episodes - ep - 1) as f64;
        if treasure_known {
            total += 1.0;
        } else if unknown > 0 && (2.0 * p - 1.0) + p * remaining > 0.0 {
            unknown -= 1;
            if rng.gen_bool(p) {
                treasure_known = true;
                total += 1.0;
            } else {
                total -= 1.0;
            }
        }
    }
    total
}

/// Runs the standard formula-vs-simulation table: all four closed forms at
/// their reference arguments.
pub fn standard_mc_reports(n_samples: usize, seed: u64) -> Vec<McReport> {
    let (rho, revisits) = (-4.0, 9.0);
    let threshold = revisit_threshold(rho);
    vec![
        mc_check(
            "expected_revisit_value",
            expected_revisit_value(rho, revisits),
            n_samples,
            0.02,
            seed,
            |rng| sample_revisit_value(rho, revisits, rng),
        ),
        mc_check(
            // At n = threshold the revisit value crosses zero, so the same
            // sampler run at the threshold must average out to nothing.
            "revisit_threshold",
            0.0,
            n_samples,
            0.02,
            seed,
            |rng| sample_revisit_value(rho, threshold, rng),
        ),
        mc_check(
            "myopic_optimal_bound",
            myopic_optimal_bound(rho, revisits),
            n_samples,
            0.02,
            seed,
            |rng| sample_myopic_exploration(rho, revisits, rng),
        ),
        mc_check(
            "raymaze_optimal_bound",
            raymaze_optimal_bound(0.3, 4, 3),
            n_samples,
            0.01,
            seed,
            |rng| sample_threshold_policy(0.3, 4, 3, rng),
        ),
    ]
}
