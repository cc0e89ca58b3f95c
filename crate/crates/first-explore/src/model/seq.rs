//! Full-sequence forward and backward passes with cached activations.
//!
//! Training forwards a rollout's cumulative context once as a trunk, then
//! forwards each branch episode against a trunk prefix: branch queries
//! attend the prefix's cached keys/values. Branch backward passes
//! accumulate gradients for those prefix keys/values into [`PrefixGrads`],
//! which the trunk backward then injects at the matching layer, so the
//! trunk is traversed exactly once in each direction regardless of how
//! many branches hang off it.

use super::math::{gelu, gelu_prime, layer_norm, layer_norm_backward, softmax_in_place};
use super::params::{PolicyParams, Tensor};
use super::{Head, ModelConfig, ModelError, Token};

/// out[j] = bias[j] + sum_i x[i] * w[i][j]
pub(crate) fn linear(x: &[f64], w: &Tensor, bias: &Tensor, out: &mut [f64]) {
    debug_assert_eq!(x.len(), w.rows);
    debug_assert_eq!(out.len(), w.cols);
    out.copy_from_slice(&bias.data);
    for (i, &xi) in x.iter().enumerate() {
        for (o, wij) in out.iter_mut().zip(w.row(i)) {
            *o += xi * wij;
        }
    }
}

/// The internal token prepended when a domain has no reset tokens, so the
/// first action of a rollout has a position to be predicted from.
pub(crate) fn begin_token(cfg: &ModelConfig) -> Token {
    Token {
        action: None,
        observation: vec![0.0; cfg.observation_dim],
        reward: 0.0,
        timestep: 0,
        episode: 0,
    }
}

/// Sum of the five component embeddings for one token.
pub(crate) fn embed_token(
    params: &PolicyParams,
    token: &Token,
    out: &mut [f64],
) -> Result<(), ModelError> {
    let cfg = &params.config;
    if token.observation.len() != cfg.observation_dim {
        return Err(ModelError::ObservationDimMismatch {
            got: token.observation.len(),
            want: cfg.observation_dim,
        });
    }
    assert!(token.timestep < cfg.timestep_slots, "timestep {} out of table", token.timestep);
    assert!(token.episode < cfg.episode_slots, "episode {} out of table", token.episode);
    out.copy_from_slice(params.action_emb.row(params.action_row(token.action)));
    for (i, &obs) in token.observation.iter().enumerate() {
        for (x, e) in out.iter_mut().zip(params.obs_emb.row(i)) {
            *x += obs * e;
        }
    }
    for (x, e) in out.iter_mut().zip(params.reward_emb.row(0)) {
        *x += token.reward * e;
    }
    for (x, e) in out.iter_mut().zip(params.timestep_emb.row(token.timestep)) {
        *x += e;
    }
    for (x, e) in out.iter_mut().zip(params.episode_emb.row(token.episode)) {
        *x += e;
    }
    Ok(())
}

fn embed_backward(grads: &mut PolicyParams, params: &PolicyParams, token: &Token, d: &[f64]) {
    let row = params.action_row(token.action);
    for (g, dv) in grads.action_emb.row_mut(row).iter_mut().zip(d) {
        *g += dv;
    }
    for (i, &obs) in token.observation.iter().enumerate() {
        if obs != 0.0 {
            for (g, dv) in grads.obs_emb.row_mut(i).iter_mut().zip(d) {
                *g += obs * dv;
            }
        }
    }
    if token.reward != 0.0 {
        for (g, dv) in grads.reward_emb.row_mut(0).iter_mut().zip(d) {
            *g += token.reward * dv;
        }
    }
    for (g, dv) in grads.timestep_emb.row_mut(token.timestep).iter_mut().zip(d) {
        *g += dv;
    }
    for (g, dv) in grads.episode_emb.row_mut(token.episode).iter_mut().zip(d) {
        *g += dv;
    }
}

/// Per-layer activations kept for the backward pass. Key/value buffers hold
/// `prefix + local` rows so branch and trunk backward share one code path.
#[derive(Debug)]
struct LayerActs {
    ln1_stats: Vec<(f64, f64)>,
    ln1_out: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// Attention weights, head-major, row stride `prefix + seq_len`.
    attn: Vec<f64>,
    ctx: Vec<f64>,
    x_mid: Vec<f64>,
    ln2_stats: Vec<(f64, f64)>,
    ln2_out: Vec<f64>,
    m1: Vec<f64>,
    act: Vec<f64>,
}

/// One forward pass with everything the backward pass needs.
#[derive(Debug)]
pub struct SeqForward {
    /// Embedded tokens, including any synthesized begin token.
    pub tokens: Vec<Token>,
    pub begin_offset: usize,
    pub seq_len: usize,
    pub prefix_len: usize,
    /// Residual stream before each layer; `xs[layers]` feeds the final norm.
    xs: Vec<Vec<f64>>,
    layers: Vec<LayerActs>,
    final_stats: Vec<(f64, f64)>,
    /// Post final-norm hidden states, `seq_len * hidden`.
    pub hidden_final: Vec<f64>,
}

/// Forward over a cumulative context. Prepends the begin token for domains
/// without reset tokens.
pub fn forward_trunk(params: &PolicyParams, tokens: &[Token]) -> Result<SeqForward, ModelError> {
    forward_internal(params, tokens, params.config.implicit_begin, None, 0)
}

/// Forward over one branch episode whose attention sees the first
/// `prefix_len` positions of `trunk`.
pub fn forward_branch(
    params: &PolicyParams,
    trunk: &SeqForward,
    prefix_len: usize,
    tokens: &[Token],
) -> Result<SeqForward, ModelError> {
    assert_eq!(trunk.prefix_len, 0, "branches must hang off a trunk");
    assert!(prefix_len <= trunk.seq_len);
    forward_internal(params, tokens, false, Some(trunk), prefix_len)
}

fn forward_internal(
    params: &PolicyParams,
    tokens_in: &[Token],
    with_begin: bool,
    prefix: Option<&SeqForward>,
    prefix_len: usize,
) -> Result<SeqForward, ModelError> {
    let cfg = &params.config;
    let d = cfg.hidden;
    let heads = cfg.heads;
    let hd = cfg.head_dim();
    let inv_sqrt = 1.0 / (hd as f64).sqrt();

    let mut tokens = Vec::with_capacity(tokens_in.len() + 1);
    if with_begin {
        tokens.push(begin_token(cfg));
    }
    tokens.extend_from_slice(tokens_in);
    let t_len = tokens.len();
    let total = prefix_len + t_len;
    if total > cfg.capacity() {
        return Err(ModelError::ContextOverflow { len: total, capacity: cfg.capacity() });
    }
    let pt = total;

    let mut x0 = vec![0.0; t_len * d];
    for (t, tok) in tokens.iter().enumerate() {
        embed_token(params, tok, &mut x0[t * d..(t + 1) * d])?;
    }

    let mut xs = Vec::with_capacity(cfg.layers + 1);
    xs.push(x0);
    let mut layer_acts = Vec::with_capacity(cfg.layers);

    for l in 0..cfg.layers {
        let lp = &params.layers[l];
        let x = xs[l].clone();
        let mut ln1_stats = Vec::with_capacity(t_len);
        let mut ln1_out = vec![0.0; t_len * d];
        for t in 0..t_len {
            let stats = layer_norm(
                &x[t * d..(t + 1) * d],
                &lp.ln1_g.data,
                &lp.ln1_b.data,
                &mut ln1_out[t * d..(t + 1) * d],
            );
            ln1_stats.push(stats);
        }

        let mut q = vec![0.0; t_len * d];
        let mut k = vec![0.0; pt * d];
        let mut v = vec![0.0; pt * d];
        if let Some(p) = prefix {
            k[..prefix_len * d].copy_from_slice(&p.layers[l].k[..prefix_len * d]);
            v[..prefix_len * d].copy_from_slice(&p.layers[l].v[..prefix_len * d]);
        }
        for t in 0..t_len {
            let h1 = &ln1_out[t * d..(t + 1) * d];
            linear(h1, &lp.wq, &lp.bq, &mut q[t * d..(t + 1) * d]);
            let row = prefix_len + t;
            linear(h1, &lp.wk, &lp.bk, &mut k[row * d..(row + 1) * d]);
            linear(h1, &lp.wv, &lp.bv, &mut v[row * d..(row + 1) * d]);
        }

        let mut attn = vec![0.0; heads * t_len * pt];
        let mut ctx = vec![0.0; t_len * d];
        for m in 0..heads {
            let ms = m * hd;
            for t in 0..t_len {
                let keys = prefix_len + t + 1;
                let qrow = &q[t * d + ms..t * d + ms + hd];
                let arow = &mut attn[(m * t_len + t) * pt..(m * t_len + t) * pt + keys];
                for (u, a) in arow.iter_mut().enumerate() {
                    let krow = &k[u * d + ms..u * d + ms + hd];
                    let mut s = 0.0;
                    for (qi, ki) in qrow.iter().zip(krow) {
                        s += qi * ki;
                    }
                    *a = s * inv_sqrt;
                }
                softmax_in_place(arow);
                let crow = &mut ctx[t * d + ms..t * d + ms + hd];
                for (u, &w) in arow.iter().enumerate() {
                    let vrow = &v[u * d + ms..u * d + ms + hd];
                    for (c, vi) in crow.iter_mut().zip(vrow) {
                        *c += w * vi;
                    }
                }
            }
        }

        let mut x_mid = vec![0.0; t_len * d];
        let mut attn_out = vec![0.0; d];
        for t in 0..t_len {
            linear(&ctx[t * d..(t + 1) * d], &lp.wo, &lp.bo, &mut attn_out);
            for i in 0..d {
                x_mid[t * d + i] = x[t * d + i] + attn_out[i];
            }
        }

        let d4 = 4 * d;
        let mut ln2_stats = Vec::with_capacity(t_len);
        let mut ln2_out = vec![0.0; t_len * d];
        let mut m1 = vec![0.0; t_len * d4];
        let mut act = vec![0.0; t_len * d4];
        let mut x_out = vec![0.0; t_len * d];
        let mut mlp_out = vec![0.0; d];
        for t in 0..t_len {
            let stats = layer_norm(
                &x_mid[t * d..(t + 1) * d],
                &lp.ln2_g.data,
                &lp.ln2_b.data,
                &mut ln2_out[t * d..(t + 1) * d],
            );
            ln2_stats.push(stats);
            linear(&ln2_out[t * d..(t + 1) * d], &lp.w1, &lp.b1, &mut m1[t * d4..(t + 1) * d4]);
            for i in 0..d4 {
                act[t * d4 + i] = gelu(m1[t * d4 + i]);
            }
            linear(&act[t * d4..(t + 1) * d4], &lp.w2, &lp.b2, &mut mlp_out);
            for i in 0..d {
                x_out[t * d + i] = x_mid[t * d + i] + mlp_out[i];
            }
        }

        layer_acts.push(LayerActs {
            ln1_stats,
            ln1_out,
            q,
            k,
            v,
            attn,
            ctx,
            x_mid,
            ln2_stats,
            ln2_out,
            m1,
            act,
        });
        xs.push(x_out);
    }

    let mut final_stats = Vec::with_capacity(t_len);
    let mut hidden_final = vec![0.0; t_len * d];
    let x_last = &xs[cfg.layers];
    for t in 0..t_len {
        let stats = layer_norm(
            &x_last[t * d..(t + 1) * d],
            &params.final_ln_g.data,
            &params.final_ln_b.data,
            &mut hidden_final[t * d..(t + 1) * d],
        );
        final_stats.push(stats);
    }

    Ok(SeqForward {
        tokens,
        begin_offset: usize::from(with_begin),
        seq_len: t_len,
        prefix_len,
        xs,
        layers: layer_acts,
        final_stats,
        hidden_final,
    })
}

fn head_tensors(params: &PolicyParams, head: Head) -> (&Tensor, &Tensor) {
    match head {
        Head::Explore => (&params.explore_w, &params.explore_b),
        Head::Exploit => (&params.exploit_w, &params.exploit_b),
    }
}

/// Action logits at one sequence position under one head.
pub fn head_logits(params: &PolicyParams, seq: &SeqForward, pos: usize, head: Head) -> Vec<f64> {
    assert!(pos < seq.seq_len);
    let (w, b) = head_tensors(params, head);
    let mut out = vec![0.0; params.config.action_count];
    linear(&seq.hidden_final[pos * params.config.hidden..(pos + 1) * params.config.hidden], w, b, &mut out);
    out
}

/// Loss gradient w.r.t. the logits at one position.
pub struct HeadGrad {
    pub pos: usize,
    pub head: Head,
    pub d_logits: Vec<f64>,
}

/// Per-layer gradients of a trunk's key/value rows, accumulated by branch
/// backward passes and injected into the trunk backward.
pub struct PrefixGrads {
    pub d_k: Vec<Vec<f64>>,
    pub d_v: Vec<Vec<f64>>,
}

impl PrefixGrads {
    pub fn zeros(layers: usize, rows: usize, hidden: usize) -> Self {
        PrefixGrads {
            d_k: (0..layers).map(|_| vec![0.0; rows * hidden]).collect(),
            d_v: (0..layers).map(|_| vec![0.0; rows * hidden]).collect(),
        }
    }
}

/// Backward through one forward pass, accumulating into `grads`.
///
/// For a branch, `prefix_out` collects d(key)/d(value) rows of the trunk
/// prefix. For a trunk, `injected` carries those accumulated rows back in.
pub fn backward(
    params: &PolicyParams,
    seq: &SeqForward,
    head_grads: &[HeadGrad],
    injected: Option<&PrefixGrads>,
    grads: &mut PolicyParams,
    mut prefix_out: Option<&mut PrefixGrads>,
) {
    let cfg = &params.config;
    let d = cfg.hidden;
    let d4 = 4 * d;
    let heads = cfg.heads;
    let hd = cfg.head_dim();
    let inv_sqrt = 1.0 / (hd as f64).sqrt();
    let t_len = seq.seq_len;
    let p_len = seq.prefix_len;
    let pt = p_len + t_len;
    if injected.is_some() {
        assert_eq!(p_len, 0, "gradient injection applies to trunks only");
    }

    // Head layers.
    let mut d_hf = vec![0.0; t_len * d];
    for hg in head_grads {
        assert!(hg.pos < t_len);
        let hf = &seq.hidden_final[hg.pos * d..(hg.pos + 1) * d];
        let (gw, gb) = match hg.head {
            Head::Explore => (&mut grads.explore_w, &mut grads.explore_b),
            Head::Exploit => (&mut grads.exploit_w, &mut grads.exploit_b),
        };
        for (gbj, dz) in gb.data.iter_mut().zip(&hg.d_logits) {
            *gbj += dz;
        }
        for (i, &hfi) in hf.iter().enumerate() {
            for (g, dz) in gw.row_mut(i).iter_mut().zip(&hg.d_logits) {
                *g += hfi * dz;
            }
        }
        let (w, _) = head_tensors(params, hg.head);
        let dst = &mut d_hf[hg.pos * d..(hg.pos + 1) * d];
        for (i, dv) in dst.iter_mut().enumerate() {
            let mut s = 0.0;
            for (wij, dz) in w.row(i).iter().zip(&hg.d_logits) {
                s += wij * dz;
            }
            *dv += s;
        }
    }

    // Final layer norm.
    let mut d_x = vec![0.0; t_len * d];
    let x_last = &seq.xs[cfg.layers];
    for t in 0..t_len {
        let (mean, rstd) = seq.final_stats[t];
        layer_norm_backward(
            &x_last[t * d..(t + 1) * d],
            &params.final_ln_g.data,
            mean,
            rstd,
            &d_hf[t * d..(t + 1) * d],
            &mut grads.final_ln_g.data,
            &mut grads.final_ln_b.data,
            &mut d_x[t * d..(t + 1) * d],
        );
    }

    for l in (0..cfg.layers).rev() {
        let lp = &params.layers[l];
        let acts = &seq.layers[l];
        let x_in = &seq.xs[l];

        // MLP path; d_x holds d(x_out), residual copies it into d(x_mid).
        let mut d_x_mid = d_x.clone();
        {
            let gl = &mut grads.layers[l];
            let mut d_a = vec![0.0; d4];
            let mut d_m1 = vec![0.0; d4];
            let mut d_h2 = vec![0.0; d];
            for t in 0..t_len {
                let d_out = &d_x[t * d..(t + 1) * d];
                let a_row = &acts.act[t * d4..(t + 1) * d4];
                for (gbj, dz) in gl.b2.data.iter_mut().zip(d_out) {
                    *gbj += dz;
                }
                for i in 0..d4 {
                    let mut s = 0.0;
                    for (w2ij, dz) in lp.w2.row(i).iter().zip(d_out) {
                        s += w2ij * dz;
                    }
                    d_a[i] = s;
                    for (g, dz) in gl.w2.row_mut(i).iter_mut().zip(d_out) {
                        *g += a_row[i] * dz;
                    }
                }
                for i in 0..d4 {
                    d_m1[i] = d_a[i] * gelu_prime(acts.m1[t * d4 + i]);
                }
                let h2 = &acts.ln2_out[t * d..(t + 1) * d];
                for (gbj, dz) in gl.b1.data.iter_mut().zip(&d_m1) {
                    *gbj += dz;
                }
                for i in 0..d {
                    let mut s = 0.0;
                    for (w1ij, dz) in lp.w1.row(i).iter().zip(&d_m1) {
                        s += w1ij * dz;
                    }
                    d_h2[i] = s;
                    for (g, dz) in gl.w1.row_mut(i).iter_mut().zip(&d_m1) {
                        *g += h2[i] * dz;
                    }
                }
                let (mean, rstd) = acts.ln2_stats[t];
                layer_norm_backward(
                    &acts.x_mid[t * d..(t + 1) * d],
                    &lp.ln2_g.data,
                    mean,
                    rstd,
                    &d_h2,
                    &mut gl.ln2_g.data,
                    &mut gl.ln2_b.data,
                    &mut d_x_mid[t * d..(t + 1) * d],
                );
            }
        }

        // Attention path; d_x_mid holds d(x_mid), residual copies into d(x_in).
        let mut d_x_new = d_x_mid.clone();
        {
            let mut d_ctx = vec![0.0; t_len * d];
            {
                let gl = &mut grads.layers[l];
                for t in 0..t_len {
                    let d_ao = &d_x_mid[t * d..(t + 1) * d];
                    let ctx_row = &acts.ctx[t * d..(t + 1) * d];
                    for (gbj, dz) in gl.bo.data.iter_mut().zip(d_ao) {
                        *gbj += dz;
                    }
                    for i in 0..d {
                        let mut s = 0.0;
                        for (woij, dz) in lp.wo.row(i).iter().zip(d_ao) {
                            s += woij * dz;
                        }
                        d_ctx[t * d + i] = s;
                        for (g, dz) in gl.wo.row_mut(i).iter_mut().zip(d_ao) {
                            *g += ctx_row[i] * dz;
                        }
                    }
                }
            }

            let mut d_q = vec![0.0; t_len * d];
            let mut d_k = vec![0.0; pt * d];
            let mut d_v = vec![0.0; pt * d];
            if let Some(inj) = injected {
                d_k.copy_from_slice(&inj.d_k[l]);
                d_v.copy_from_slice(&inj.d_v[l]);
            }
            let mut d_w = vec![0.0; pt];
            for m in 0..heads {
                let ms = m * hd;
                for t in 0..t_len {
                    let keys = p_len + t + 1;
                    let arow = &acts.attn[(m * t_len + t) * pt..(m * t_len + t) * pt + keys];
                    let dc = &d_ctx[t * d + ms..t * d + ms + hd];
                    let mut dot_wd = 0.0;
                    for u in 0..keys {
                        let vrow = &acts.v[u * d + ms..u * d + ms + hd];
                        let mut s = 0.0;
                        for (ci, vi) in dc.iter().zip(vrow) {
                            s += ci * vi;
                        }
                        d_w[u] = s;
                        dot_wd += arow[u] * s;
                        let dvrow = &mut d_v[u * d + ms..u * d + ms + hd];
                        for (dvi, ci) in dvrow.iter_mut().zip(dc) {
                            *dvi += arow[u] * ci;
                        }
                    }
                    let qrow = &acts.q[t * d + ms..t * d + ms + hd];
                    let dqrow = &mut d_q[t * d + ms..t * d + ms + hd];
                    for u in 0..keys {
                        let ds = arow[u] * (d_w[u] - dot_wd) * inv_sqrt;
                        if ds == 0.0 {
                            continue;
                        }
                        let krow = &acts.k[u * d + ms..u * d + ms + hd];
                        for (dqi, ki) in dqrow.iter_mut().zip(krow) {
                            *dqi += ds * ki;
                        }
                        let dkrow = &mut d_k[u * d + ms..u * d + ms + hd];
                        for (dki, qi) in dkrow.iter_mut().zip(qrow) {
                            *dki += ds * qi;
                        }
                    }
                }
            }

            if let Some(po) = prefix_out.as_deref_mut() {
                for (dst, src) in po.d_k[l][..p_len * d].iter_mut().zip(&d_k[..p_len * d]) {
                    *dst += src;
                }
                for (dst, src) in po.d_v[l][..p_len * d].iter_mut().zip(&d_v[..p_len * d]) {
                    *dst += src;
                }
            }

            // Local q/k/v rows propagate into the layer's projections.
            let gl = &mut grads.layers[l];
            let mut d_h1 = vec![0.0; d];
            for t in 0..t_len {
                let h1 = &acts.ln1_out[t * d..(t + 1) * d];
                d_h1.iter_mut().for_each(|v| *v = 0.0);
                let row = p_len + t;
                for (w, b_grad, w_grad, d_slice) in [
                    (&lp.wq, &mut gl.bq, &mut gl.wq, &d_q[t * d..(t + 1) * d]),
                    (&lp.wk, &mut gl.bk, &mut gl.wk, &d_k[row * d..(row + 1) * d]),
                    (&lp.wv, &mut gl.bv, &mut gl.wv, &d_v[row * d..(row + 1) * d]),
                ] {
                    for (gbj, dz) in b_grad.data.iter_mut().zip(d_slice) {
                        *gbj += dz;
                    }
                    for i in 0..d {
                        let mut s = 0.0;
                        for (wij, dz) in w.row(i).iter().zip(d_slice) {
                            s += wij * dz;
                        }
                        d_h1[i] += s;
                        for (g, dz) in w_grad.row_mut(i).iter_mut().zip(d_slice) {
                            *g += h1[i] * dz;
                        }
                    }
                }
                let (mean, rstd) = acts.ln1_stats[t];
                layer_norm_backward(
                    &x_in[t * d..(t + 1) * d],
                    &lp.ln1_g.data,
                    mean,
                    rstd,
                    &d_h1,
                    &mut gl.ln1_g.data,
                    &mut gl.ln1_b.data,
                    &mut d_x_new[t * d..(t + 1) * d],
                );
            }
        }
        d_x = d_x_new;
    }

    for (t, tok) in seq.tokens.iter().enumerate() {
        embed_backward(grads, params, tok, &d_x[t * d..(t + 1) * d]);
    }
}
