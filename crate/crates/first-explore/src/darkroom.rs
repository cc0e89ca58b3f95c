//! Dark treasure rooms: a blind 9x9 grid with 8 consumable objects.
//!
//! Object values are uniform on [rho, 2); objects sharing a cell sum. The
//! agent starts every episode at the center, sees only its own (x, y), and
//! collects whatever unconsumed value sits on the cell where a step resolves.
//! Consumption lasts for the rest of the episode and resets at the next one.

use crate::env::{Domain, Env, EnvSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const GRID: usize = 9;
pub const OBJECTS: usize = 8;
const START: (usize, usize) = (GRID / 2, GRID / 2);

/// Actions: four cardinal moves plus stay.
pub const ACTIONS: usize = 5;

#[derive(Debug, Clone)]
pub struct DarkroomDomain {
    spec: EnvSpec,
    pub rho: f64,
}

impl DarkroomDomain {
    pub fn new(rho: f64, steps: usize, episodes: usize) -> Self {
        assert!(rho <= 2.0, "object values live in [rho, 2)");
        Self {
            spec: EnvSpec::new(
                format!("{GRID}x{GRID} dark room, {OBJECTS} objects"),
                ACTIONS,
                2,
                steps,
                episodes,
                1.0,
                true,
            ),
            rho,
        }
    }

    /// Reference shape: 9 steps per episode, 10 episodes.
    pub fn standard(rho: f64) -> Self {
        Self::new(rho, 9, 10)
    }
}

impl Domain for DarkroomDomain {
    type Instance = DarkroomEnv;

    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> DarkroomEnv {
        let objects = (0..OBJECTS)
            .map(|_| {
                let x = rng.gen_range(0..GRID);
                let y = rng.gen_range(0..GRID);
                let value = rng.gen_range(self.rho..2.0);
                ((x, y), value)
            })
            .collect();
        DarkroomEnv { objects, pos: START, consumed: [false; OBJECTS] }
    }
}

#[derive(Debug, Clone)]
pub struct DarkroomEnv {
    /// Positions may repeat; a shared cell pays the sum of its objects.
    pub objects: Vec<((usize, usize), f64)>,
    pos: (usize, usize),
    consumed: [bool; OBJECTS],
}

impl DarkroomEnv {
    fn observe(&self) -> Vec<f64> {
        vec![self.pos.0 as f64, self.pos.1 as f64]
    }

    /// Collects every unconsumed object on the current cell.
    fn collect(&mut self) -> f64 {
        let mut reward = 0.0;
        for (i, &(cell, value)) in self.objects.iter().enumerate() {
            if cell == self.pos && !self.consumed[i] {
                self.consumed[i] = true;
                reward += value;
            }
        }
        reward
    }
}

impl Env for DarkroomEnv {
    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.pos = START;
        self.consumed = [false; OBJECTS];
        self.observe()
    }

    fn step(&mut self, action: usize, _rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
        let (x, y) = self.pos;
        // 0..3: up, down, left, right (off-grid moves clamp); 4: stay.
        self.pos = match action {
            0 => (x, (y + 1).min(GRID - 1)),
            1 => (x, y.saturating_sub(1)),
            2 => (x.saturating_sub(1), y),
            3 => ((x + 1).min(GRID - 1), y),
            4 => (x, y),
            _ => panic!("action {action} out of range"),
        };
        let reward = self.collect();
        (self.observe(), reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::mean_std_indexed;
    use crate::rng::stream_rng;

    fn sample(seed: u64, idx: u64, rho: f64) -> (DarkroomEnv, ChaCha8Rng) {
        let domain = DarkroomDomain::standard(rho);
        let mut rng = stream_rng(seed, "test.dark", idx);
        let env = domain.sample(&mut rng);
        (env, rng)
    }

    #[test]
    fn nonneg_rho_means_nonneg_values() {
        for i in 0..100 {
            let (env, _) = sample(1, i, 0.0);
            assert!(env.objects.iter().all(|&(_, v)| (0.0..2.0).contains(&v)));
        }
    }

    #[test]
    fn value_distribution_moments() {
        let (mean, _) = mean_std_indexed(125_000, |i| {
            let (env, _) = sample(2, i as u64, -4.0);
            env.objects.iter().map(|&(_, v)| v).sum::<f64>() / OBJECTS as f64
        });
        assert!((mean - -1.0).abs() < 0.01, "mean object value {mean}");
        let (frac_pos, _) = mean_std_indexed(125_000, |i| {
            let (env, _) = sample(3, i as u64, -4.0);
            env.objects.iter().filter(|&&(_, v)| v > 0.0).count() as f64 / OBJECTS as f64
        });
        assert!((frac_pos - 1.0 / 3.0).abs() < 0.005, "positive fraction {frac_pos}");
    }

    #[test]
    fn stay_forever_collects_only_the_start_cell() {
        for i in 0..200 {
            let (mut env, mut rng) = sample(4, i, -4.0);
            let expected: f64 =
                env.objects.iter().filter(|&&(cell, _)| cell == START).map(|&(_, v)| v).sum();
            env.reset(&mut rng);
            let total: f64 = (0..9).map(|_| env.step(4, &mut rng).1).sum();
            assert!((total - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn revisits_within_an_episode_pay_nothing() {
        let mut env = DarkroomEnv {
            objects: vec![((4, 5), 1.5); OBJECTS],
            pos: START,
            consumed: [false; OBJECTS],
        };
        let mut rng = stream_rng(5, "test.dark", 0);
        env.reset(&mut rng);
        assert_eq!(env.step(0, &mut rng).1, 1.5 * OBJECTS as f64); // onto the pile
        assert_eq!(env.step(4, &mut rng).1, 0.0); // stay on it
        assert_eq!(env.step(1, &mut rng).1, 0.0); // off
        assert_eq!(env.step(0, &mut rng).1, 0.0); // back again
        // A fresh episode restores the pile.
        env.reset(&mut rng);
        assert_eq!(env.step(0, &mut rng).1, 1.5 * OBJECTS as f64);
    }

    #[test]
    fn moves_clamp_at_walls_and_observation_tracks_position() {
        let (mut env, mut rng) = sample(6, 0, -4.0);
        let obs = env.reset(&mut rng);
        assert_eq!(obs, vec![4.0, 4.0]);
        for _ in 0..10 {
            let (obs, _) = env.step(2, &mut rng); // left, clamping at x=0
            assert!(obs[0] >= 0.0);
        }
        assert_eq!(env.observe(), vec![0.0, 4.0]);
        let (obs, _) = env.step(1, &mut rng);
        assert_eq!(obs, vec![0.0, 3.0]);
    }

    #[test]
    fn random_walk_cumulative_matches_reported_scale() {
        // 10 episodes of 9 uniform-random actions; mean cumulative reward
        // over sampled rooms at rho = -4.
        let domain = DarkroomDomain::standard(-4.0);
        let (mean, _) = mean_std_indexed(100_000, |i| {
            let mut rng = stream_rng(7, "test.dark.walk", i as u64);
            let mut env = domain.sample(&mut rng);
            let mut total = 0.0;
            for _ in 0..10 {
                env.reset(&mut rng);
                for _ in 0..9 {
                    let a = rng.gen_range(0..ACTIONS);
                    total += env.step(a, &mut rng).1;
                }
            }
            total
        });
        assert!((mean - -5.5).abs() < 0.5, "random-walk cumulative {mean}");
    }
}
