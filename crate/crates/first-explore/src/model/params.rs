//! Named-tensor parameter store for the sequence model.
//!
//! Tensor traversal order is part of the public contract: the optimizer
//! aligns its moment buffers by position, and checkpoints serialize tensors
//! in exactly this order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ModelConfig;

/// Dense row-major f64 tensor; vectors use a single row.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn normal(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> Self {
        let dist = Normal::new(0.0, std).expect("std is finite");
        let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
        Tensor { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// One transformer block: pre-norm attention then pre-norm MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub ln1_g: Tensor,
    pub ln1_b: Tensor,
    pub wq: Tensor,
    pub bq: Tensor,
    pub wk: Tensor,
    pub bk: Tensor,
    pub wv: Tensor,
    pub bv: Tensor,
    pub wo: Tensor,
    pub bo: Tensor,
    pub ln2_g: Tensor,
    pub ln2_b: Tensor,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

/// Every parameter of the two-headed policy model.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub config: ModelConfig,
    /// One row per action plus a final non-action row for reset/begin tokens.
    pub action_emb: Tensor,
    pub obs_emb: Tensor,
    pub reward_emb: Tensor,
    pub timestep_emb: Tensor,
    pub episode_emb: Tensor,
    pub layers: Vec<LayerParams>,
    pub final_ln_g: Tensor,
    pub final_ln_b: Tensor,
    pub explore_w: Tensor,
    pub explore_b: Tensor,
    pub exploit_w: Tensor,
    pub exploit_b: Tensor,
}

const INIT_STD: f64 = 0.02;

impl PolicyParams {
    pub fn init(config: ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let d = config.hidden;
        let a = config.action_count;
        let layers = (0..config.layers)
            .map(|_| LayerParams {
                ln1_g: Tensor::filled(1, d, 1.0),
                ln1_b: Tensor::zeros(1, d),
                wq: Tensor::normal(d, d, INIT_STD, rng),
                bq: Tensor::zeros(1, d),
                wk: Tensor::normal(d, d, INIT_STD, rng),
                bk: Tensor::zeros(1, d),
                wv: Tensor::normal(d, d, INIT_STD, rng),
                bv: Tensor::zeros(1, d),
                wo: Tensor::normal(d, d, INIT_STD, rng),
                bo: Tensor::zeros(1, d),
                ln2_g: Tensor::filled(1, d, 1.0),
                ln2_b: Tensor::zeros(1, d),
                w1: Tensor::normal(d, 4 * d, INIT_STD, rng),
                b1: Tensor::zeros(1, 4 * d),
                w2: Tensor::normal(4 * d, d, INIT_STD, rng),
                b2: Tensor::zeros(1, d),
            })
            .collect();
        PolicyParams {
            action_emb: Tensor::normal(a + 1, d, INIT_STD, rng),
            obs_emb: Tensor::normal(config.observation_dim, d, INIT_STD, rng),
            reward_emb: Tensor::normal(1, d, INIT_STD, rng),
            timestep_emb: Tensor::normal(config.timestep_slots, d, INIT_STD, rng),
            episode_emb: Tensor::normal(config.episode_slots, d, INIT_STD, rng),
            layers,
            final_ln_g: Tensor::filled(1, d, 1.0),
            final_ln_b: Tensor::zeros(1, d),
            explore_w: Tensor::normal(d, a, INIT_STD, rng),
            explore_b: Tensor::zeros(1, a),
            exploit_w: Tensor::normal(d, a, INIT_STD, rng),
            exploit_b: Tensor::zeros(1, a),
            config,
        }
    }

    /// Same shapes, all zeros; the gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for t in out.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
        out
    }

    /// All-zero parameters for a config, ready to be filled elementwise.
    pub fn zeros(config: ModelConfig) -> Self {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        PolicyParams::init(config, &mut rng).zeros_like()
    }

    /// All tensors in the canonical traversal order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![
            &self.action_emb,
            &self.obs_emb,
            &self.reward_emb,
            &self.timestep_emb,
            &self.episode_emb,
        ];
        for l in &self.layers {
            out.extend([
                &l.ln1_g, &l.ln1_b, &l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo,
                &l.ln2_g, &l.ln2_b, &l.w1, &l.b1, &l.w2, &l.b2,
            ]);
        }
        out.extend([
            &self.final_ln_g,
            &self.final_ln_b,
            &self.explore_w,
            &self.explore_b,
            &self.exploit_w,
            &self.exploit_b,
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = vec![
            &mut self.action_emb,
            &mut self.obs_emb,
            &mut self.reward_emb,
            &mut self.timestep_emb,
            &mut self.episode_emb,
        ];
        for l in &mut self.layers {
            out.extend([
                &mut l.ln1_g, &mut l.ln1_b, &mut l.wq, &mut l.bq, &mut l.wk, &mut l.bk,
                &mut l.wv, &mut l.bv, &mut l.wo, &mut l.bo, &mut l.ln2_g, &mut l.ln2_b,
                &mut l.w1, &mut l.b1, &mut l.w2, &mut l.b2,
            ]);
        }
        out.extend([
            &mut self.final_ln_g,
            &mut self.final_ln_b,
            &mut self.explore_w,
            &mut self.explore_b,
            &mut self.exploit_w,
            &mut self.exploit_b,
        ]);
        out
    }

    /// Names aligned with [`Self::tensors`]; stable across runs, used by the
    /// checkpoint format.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out: Vec<String> = ["action_emb", "obs_emb", "reward_emb", "timestep_emb", "episode_emb"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for i in 0..self.layers.len() {
            for part in [
                "ln1_g", "ln1_b", "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln2_g",
                "ln2_b", "w1", "b1", "w2", "b2",
            ] {
                out.push(format!("layer{i}.{part}"));
            }
        }
        for part in ["final_ln_g", "final_ln_b", "explore_w", "explore_b", "exploit_w", "exploit_b"] {
            out.push(part.to_string());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// Adds `scale * other` elementwise; shapes must match.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) {
        let mut mine = self.tensors_mut();
        let theirs = other.tensors();
        assert_eq!(mine.len(), theirs.len());
        for (a, b) in mine.iter_mut().zip(theirs) {
            assert_eq!(a.data.len(), b.data.len());
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|t| t.data.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Row index into the action table for a token's action slot.
    pub fn action_row(&self, action: Option<usize>) -> usize {
        match action {
            Some(a) => {
                assert!(a < self.config.action_count, "action {a} out of range");
                a
            }
            None => self.config.action_count,
        }
    }
}

/// Uniform random action, shared by rollout epsilon-mixing and the random
/// baseline.
pub fn uniform_action(action_count: usize, rng: &mut ChaCha8Rng) -> usize {
    rng.gen_range(0..action_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvSpec;
    use crate::rng::stream_rng;

    fn small_config() -> ModelConfig {
        let spec = EnvSpec::new("grid", 3, 2, 2, 2, 1.0, true);
        ModelConfig::new(&spec, 16, 2, 1)
    }

    #[test]
    fn traversal_order_is_stable_and_complete() {
        let mut rng = stream_rng(7, "params.test", 0);
        let p = PolicyParams::init(small_config(), &mut rng);
        let names = p.tensor_names();
        assert_eq!(names.len(), p.tensors().len());
        assert_eq!(names[0], "action_emb");
        assert_eq!(names[5], "layer0.ln1_g");
        assert_eq!(names.last().unwrap(), "exploit_b");
        // 5 embeddings + 16 per layer + 6 tail
        assert_eq!(names.len(), 5 + 16 + 6);
    }

    #[test]
    fn init_statistics_match_declared_scheme() {
        let spec = EnvSpec::new("grid", 5, 8, 9, 10, 1.0, true);
        let cfg = ModelConfig::new(&spec, 64, 4, 2);
        let mut rng = stream_rng(7, "params.test", 1);
        let p = PolicyParams::init(cfg, &mut rng);
        let w = &p.layers[0].wq.data;
        let mean: f64 = w.iter().sum::<f64>() / w.len() as f64;
        let std: f64 =
            (w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w.len() as f64).sqrt();
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((std - 0.02).abs() < 0.005, "std {std}");
        assert!(p.layers[0].bq.data.iter().all(|v| *v == 0.0));
        assert!(p.layers[0].ln1_g.data.iter().all(|v| *v == 1.0));
        assert!(p.final_ln_b.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn positional_tables_have_distinct_rows() {
        let mut rng = stream_rng(7, "params.test", 2);
        let p = PolicyParams::init(small_config(), &mut rng);
        for table in [&p.timestep_emb, &p.episode_emb] {
            for i in 0..table.rows {
                for j in i + 1..table.rows {
                    assert_ne!(table.row(i), table.row(j));
                }
            }
        }
    }

    #[test]
    fn zeros_like_and_add_scaled_roundtrip() {
        let mut rng = stream_rng(7, "params.test", 3);
        let p = PolicyParams::init(small_config(), &mut rng);
        let mut acc = p.zeros_like();
        assert_eq!(acc.global_norm(), 0.0);
        acc.add_scaled(&p, 2.0);
        acc.add_scaled(&p, -1.0);
        acc.add_scaled(&p, -1.0);
        assert!(acc.global_norm() < 1e-12);
        assert_eq!(acc.param_count(), p.param_count());
    }

    #[test]
    fn action_row_maps_non_action_to_last() {
        let mut rng = stream_rng(7, "params.test", 4);
        let p = PolicyParams::init(small_config(), &mut rng);
        assert_eq!(p.action_row(Some(0)), 0);
        assert_eq!(p.action_row(None), 3);
    }
}
