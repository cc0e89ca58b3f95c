//! Scalar numeric kernels shared by the sequence model's forward and
//! backward passes.

/// Tanh-based gaussian error linear unit.
pub fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

/// Exact derivative of [`gelu`].
pub fn gelu_prime(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4;
    let u = C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let sech2 = 1.0 - t * t;
    0.5 * (1.0 + t) + 0.5 * x * sech2 * C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// Replaces `xs` with softmax(xs). Max-shifted, so any finite input is safe.
pub fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

/// Replaces `xs` with log softmax(xs).
pub fn log_softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter() {
        sum += (*x - max).exp();
    }
    let shift = max + sum.ln();
    for x in xs.iter_mut() {
        *x -= shift;
    }
}

pub const LN_EPS: f64 = 1e-5;

/// Layer norm over one hidden vector: `out = gain * xhat + bias`.
/// Returns (mean, rstd) for the backward pass.
pub fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64], out: &mut [f64]) -> (f64, f64) {
    let d = x.len();
    let mean = x.iter().sum::<f64>() / d as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
    let rstd = 1.0 / (var + LN_EPS).sqrt();
    for i in 0..d {
        out[i] = gain[i] * (x[i] - mean) * rstd + bias[i];
    }
    (mean, rstd)
}

/// Backward of [`layer_norm`]. Accumulates into `d_gain`, `d_bias`, `d_x`.
#[allow(clippy::too_many_arguments)]
pub fn layer_norm_backward(
    x: &[f64],
    gain: &[f64],
    mean: f64,
    rstd: f64,
    d_out: &[f64],
    d_gain: &mut [f64],
    d_bias: &mut [f64],
    d_x: &mut [f64],
) {
    let d = x.len();
    let mut sum_dxhat = 0.0;
    let mut sum_dxhat_xhat = 0.0;
    for i in 0..d {
        let xhat = (x[i] - mean) * rstd;
        let dxhat = d_out[i] * gain[i];
        d_gain[i] += d_out[i] * xhat;
        d_bias[i] += d_out[i];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
    }
    let inv_d = 1.0 / d as f64;
    for i in 0..d {
        let xhat = (x[i] - mean) * rstd;
        let dxhat = d_out[i] * gain[i];
        d_x[i] += rstd * (dxhat - inv_d * sum_dxhat - xhat * inv_d * sum_dxhat_xhat);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelu_reference_points() {
        assert!(gelu(0.0).abs() < 1e-15);
        assert!((gelu(1.0) - 0.841192).abs() < 1e-5);
        assert!((gelu(-1.0) + 0.158808).abs() < 1e-5);
        // reflection identity: gelu(x) - gelu(-x) = x
        for &x in &[0.3, 1.7, 2.5] {
            assert!((gelu(x) - gelu(-x) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn gelu_prime_matches_finite_differences() {
        let h = 1e-6;
        for i in -30..=30 {
            let x = i as f64 * 0.1;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_prime(x) - fd).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn softmax_normalizes_and_orders() {
        let mut xs = vec![1.0, 3.0, 2.0, -400.0];
        softmax_in_place(&mut xs);
        let sum: f64 = xs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(xs[1] > xs[2] && xs[2] > xs[0] && xs[0] > xs[3]);
        assert!(xs.iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn log_softmax_agrees_with_softmax() {
        let src = vec![0.5, -1.25, 2.0, 0.0];
        let mut a = src.clone();
        let mut b = src;
        softmax_in_place(&mut a);
        log_softmax_in_place(&mut b);
        for (p, lp) in a.iter().zip(&b) {
            assert!((p.ln() - lp).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_norm_zero_mean_unit_var() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let gain = vec![1.0; 4];
        let bias = vec![0.0; 4];
        let mut out = vec![0.0; 4];
        layer_norm(&x, &gain, &bias, &mut out);
        let mean: f64 = out.iter().sum::<f64>() / 4.0;
        let var: f64 = out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-4);
    }

    #[test]
    fn layer_norm_backward_matches_finite_differences() {
        let d = 6;
        let x: Vec<f64> = (0..d).map(|i| (i as f64 * 0.7).sin()).collect();
        let gain: Vec<f64> = (0..d).map(|i| 1.0 + 0.1 * i as f64).collect();
        let bias: Vec<f64> = (0..d).map(|i| 0.05 * i as f64).collect();
        let d_out: Vec<f64> = (0..d).map(|i| (i as f64 * 1.3).cos()).collect();

        let loss = |x: &[f64], gain: &[f64], bias: &[f64]| -> f64 {
            let mut out = vec![0.0; d];
            layer_norm(x, gain, bias, &mut out);
            out.iter().zip(&d_out).map(|(o, w)| o * w).sum()
        };

        let mut out = vec![0.0; d];
        let (mean, rstd) = layer_norm(&x, &gain, &bias, &mut out);
        let mut d_gain = vec![0.0; d];
        let mut d_bias = vec![0.0; d];
        let mut d_x = vec![0.0; d];
        layer_norm_backward(&x, &gain, mean, rstd, &d_out, &mut d_gain, &mut d_bias, &mut d_x);

        let h = 1e-6;
        for i in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (loss(&xp, &gain, &bias) - loss(&xm, &gain, &bias)) / (2.0 * h);
            assert!((d_x[i] - fd).abs() < 1e-7, "d_x[{i}]: {} vs {fd}", d_x[i]);

            let mut gp = gain.clone();
            let mut gm = gain.clone();
            gp[i] += h;
            gm[i] -= h;
            let fd = (loss(&x, &gp, &bias) - loss(&x, &gm, &bias)) / (2.0 * h);
            assert!((d_gain[i] - fd).abs() < 1e-7);

            let mut bp = bias.clone();
            let mut bm = bias.clone();
            bp[i] += h;
            bm[i] -= h;
            let fd = (loss(&x, &gain, &bp) - loss(&x, &gain, &bm)) / (2.0 * h);
            assert!((d_bias[i] - fd).abs() < 1e-7);
        }
    }
}
