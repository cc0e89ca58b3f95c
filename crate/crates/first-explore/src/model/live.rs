//! Incremental inference with per-layer key/value caches.
//!
//! Rollouts extend one [`LiveSeq`] token by token; each push costs one
//! attention row instead of a full-sequence pass. Forking clones the caches
//! so a branch episode can extend the context without disturbing the trunk.
//! The arithmetic matches [`super::seq::forward_trunk`] bit for bit.

use super::math::{gelu, layer_norm, log_softmax_in_place, softmax_in_place};
use super::params::PolicyParams;
use super::seq::{begin_token, embed_token, linear};
use super::{Head, ModelError, Token};

#[derive(Clone)]
pub struct LiveSeq<'a> {
    params: &'a PolicyParams,
    /// Per-layer key/value caches, `len * hidden` each.
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    len: usize,
    last_hidden: Vec<f64>,
}

impl<'a> LiveSeq<'a> {
    /// Empty context; domains without reset tokens start from the internal
    /// begin token so the first action has a position to read from.
    pub fn new(params: &'a PolicyParams) -> Self {
        let mut seq = LiveSeq {
            params,
            k: vec![Vec::new(); params.config.layers],
            v: vec![Vec::new(); params.config.layers],
            len: 0,
            last_hidden: Vec::new(),
        };
        if params.config.implicit_begin {
            seq.push(begin_token(&params.config)).expect("begin token fits");
        }
        seq
    }

    /// Tokens pushed so far, including any begin token.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Independent copy for a branch episode.
    pub fn fork(&self) -> Self {
        self.clone()
    }

    pub fn push(&mut self, token: Token) -> Result<(), ModelError> {
        let cfg = &self.params.config;
        if self.len + 1 > cfg.capacity() {
            return Err(ModelError::ContextOverflow { len: self.len + 1, capacity: cfg.capacity() });
        }
        let d = cfg.hidden;
        let heads = cfg.heads;
        let hd = cfg.head_dim();
        let inv_sqrt = 1.0 / (hd as f64).sqrt();
        let d4 = 4 * d;

        let mut x = vec![0.0; d];
        embed_token(self.params, &token, &mut x)?;

        let mut h1 = vec![0.0; d];
        let mut q = vec![0.0; d];
        let mut ctx = vec![0.0; d];
        let mut attn_out = vec![0.0; d];
        let mut h2 = vec![0.0; d];
        let mut m1 = vec![0.0; d4];
        let mut mlp_out = vec![0.0; d];
        for l in 0..cfg.layers {
            let lp = &self.params.layers[l];
            layer_norm(&x, &lp.ln1_g.data, &lp.ln1_b.data, &mut h1);
            linear(&h1, &lp.wq, &lp.bq, &mut q);
            let base = self.k[l].len();
            self.k[l].resize(base + d, 0.0);
            self.v[l].resize(base + d, 0.0);
            linear(&h1, &lp.wk, &lp.bk, &mut self.k[l][base..base + d]);
            linear(&h1, &lp.wv, &lp.bv, &mut self.v[l][base..base + d]);

            let keys = self.len + 1;
            ctx.iter_mut().for_each(|c| *c = 0.0);
            let mut scores = vec![0.0; keys];
            for m in 0..heads {
                let ms = m * hd;
                let qrow = &q[ms..ms + hd];
                for (u, s) in scores.iter_mut().enumerate() {
                    let krow = &self.k[l][u * d + ms..u * d + ms + hd];
                    let mut acc = 0.0;
                    for (qi, ki) in qrow.iter().zip(krow) {
                        acc += qi * ki;
                    }
                    *s = acc * inv_sqrt;
                }
                softmax_in_place(&mut scores);
                let crow = &mut ctx[ms..ms + hd];
                for (u, &w) in scores.iter().enumerate() {
                    let vrow = &self.v[l][u * d + ms..u * d + ms + hd];
                    for (c, vi) in crow.iter_mut().zip(vrow) {
                        *c += w * vi;
                    }
                }
            }
            linear(&ctx, &lp.wo, &lp.bo, &mut attn_out);
            for i in 0..d {
                x[i] += attn_out[i];
            }

            layer_norm(&x, &lp.ln2_g.data, &lp.ln2_b.data, &mut h2);
            linear(&h2, &lp.w1, &lp.b1, &mut m1);
            for v in m1.iter_mut() {
                *v = gelu(*v);
            }
            linear(&m1, &lp.w2, &lp.b2, &mut mlp_out);
            for i in 0..d {
                x[i] += mlp_out[i];
            }
        }

        let mut hf = vec![0.0; d];
        layer_norm(&x, &self.params.final_ln_g.data, &self.params.final_ln_b.data, &mut hf);
        self.last_hidden = hf;
        self.len += 1;
        Ok(())
    }

    /// Final-norm hidden state of the most recent token.
    pub fn last_hidden(&self) -> &[f64] {
        assert!(self.len > 0, "no tokens pushed yet");
        &self.last_hidden
    }

    /// Action logits for the next action, read at the last position.
    pub fn logits(&self, head: Head) -> Vec<f64> {
        let (w, b) = match head {
            Head::Explore => (&self.params.explore_w, &self.params.explore_b),
            Head::Exploit => (&self.params.exploit_w, &self.params.exploit_b),
        };
        let mut out = vec![0.0; self.params.config.action_count];
        linear(self.last_hidden(), w, b, &mut out);
        out
    }

    /// Temperature-adjusted log probabilities for the next action.
    pub fn log_probs(&self, head: Head, temperature: f64) -> Vec<f64> {
        assert!(temperature > 0.0);
        let mut z = self.logits(head);
        for zi in z.iter_mut() {
            *zi /= temperature;
        }
        log_softmax_in_place(&mut z);
        z
    }
}
