//! Pre-norm transformer encoder over per-channel feature tokens, with an
//! explicit reverse pass.
//!
//! Token 0 is the learned summary token; tokens `1..=14` are the channels'
//! 13-slot feature slices, log-compressed where non-negative, standardized
//! by [`InputNorm`](super::InputNorm), projected to `d_model` and offset by a
//! learned per-channel embedding. The head reads token 0 after a final
//! layer norm.

use super::tensor::{add_bias, add_into, col_sum_acc, mm, mm_nt, mm_tn_acc};
use super::weights::{Gradients, InputNorm, Weights};
use crate::error::Result;
use crate::features::{FeatureVector, FEATURES_PER_CHANNEL};
use crate::signal::N_CHANNELS;
use crate::synth::ClassLabel;

const LN_EPS: f64 = 1e-5;
const LOG_FLOOR: f64 = 1e-6;

/// Slots fed through `ln(x + 1e-6)`: band powers, variance, wavelet energies.
const fn is_log_slot(slot: usize) -> bool {
    !matches!(slot, 5 | 7)
}

/// Model-space token matrix `[14 x 13]` for a feature vector.
pub fn input_tokens(norm: &InputNorm, f: &FeatureVector) -> Vec<f64> {
    compress(&f.values)
        .iter()
        .enumerate()
        .map(|(i, v)| (v - norm.shift[i]) / norm.scale[i])
        .collect()
}

/// Log-compression step of [`input_tokens`], before standardization.
pub fn compress(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if is_log_slot(i % FEATURES_PER_CHANNEL) {
                (v.max(0.0) + LOG_FLOOR).ln()
            } else {
                v
            }
        })
        .collect()
}

struct LnCache {
    xhat: Vec<f64>,
    rstd: Vec<f64>,
}

fn layer_norm(x: &[f64], d: usize, gain: &[f64], bias: &[f64]) -> (Vec<f64>, LnCache) {
    let rows = x.len() / d;
    let mut out = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    let mut rstd = vec![0.0; rows];
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        rstd[r] = rs;
        for i in 0..d {
            let h = (row[i] - mean) * rs;
            xhat[r * d + i] = h;
            out[r * d + i] = gain[i] * h + bias[i];
        }
    }
    (out, LnCache { xhat, rstd })
}

fn layer_norm_back(
    dy: &[f64],
    cache: &LnCache,
    gain: &[f64],
    d: usize,
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let rows = dy.len() / d;
    let mut dx = vec![0.0; dy.len()];
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_xhat = 0.0;
        for i in 0..d {
            dgain[i] += dyr[i] * xh[i];
            dbias[i] += dyr[i];
            let dxh = dyr[i] * gain[i];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xh[i];
        }
        mean_dxhat /= d as f64;
        mean_dxhat_xhat /= d as f64;
        for i in 0..d {
            let dxh = dyr[i] * gain[i];
            dx[r * d + i] = cache.rstd[r] * (dxh - mean_dxhat - xh[i] * mean_dxhat_xhat);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

struct LayerCache {
    ln1: LnCache,
    a: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// Attention probabilities per head, `[T x T]` each.
    probs: Vec<Vec<f64>>,
    o: Vec<f64>,
    ln2: LnCache,
    b: Vec<f64>,
    h1: Vec<f64>,
    g: Vec<f64>,
}

/// Everything the reverse pass needs from one forward evaluation.
pub struct ForwardCache {
    tokens: Vec<f64>,
    layers: Vec<LayerCache>,
    lnf: LnCache,
    z: Vec<f64>,
    pub logits: Vec<f64>,
}

/// Class logits for one feature vector.
pub fn forward(w: &Weights, f: &FeatureVector) -> Result<Vec<f64>> {
    f.check_layout()?;
    Ok(forward_cached(w, &input_tokens(&w.norm, f)).logits)
}

/// Forward pass from an already-normalized token matrix.
pub fn forward_cached(w: &Weights, tokens: &[f64]) -> ForwardCache {
    let cfg = &w.cfg;
    let (d, ff, nh, dh) = (cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.head_dim());
    let t = cfg.n_tokens;
    let td = cfg.token_dim;
    let inv_sqrt = 1.0 / (dh as f64).sqrt();

    let mut x = Vec::with_capacity(t * d);
    x.extend_from_slice(&w.summary_token.data);
    let mut proj = mm(tokens, &w.proj_w.data, N_CHANNELS, td, d);
    add_bias(&mut proj, &w.proj_b.data);
    add_into(&mut proj, &w.channel_emb.data);
    x.extend_from_slice(&proj);

    let mut layers = Vec::with_capacity(cfg.n_layers);
    for l in &w.layers {
        let (a, ln1) = layer_norm(&x, d, &l.ln1_gain.data, &l.ln1_bias.data);
        let affine = |wt: &[f64], bias: &[f64]| {
            let mut y = mm(&a, wt, t, d, d);
            add_bias(&mut y, bias);
            y
        };
        let q = affine(&l.wq.data, &l.bq.data);
        let k = affine(&l.wk.data, &l.bk.data);
        let v = affine(&l.wv.data, &l.bv.data);

        let mut o = vec![0.0; t * d];
        let mut probs = Vec::with_capacity(nh);
        for h in 0..nh {
            let off = h * dh;
            let mut p = vec![0.0; t * t];
            for i in 0..t {
                let qi = &q[i * d + off..i * d + off + dh];
                let row = &mut p[i * t..(i + 1) * t];
                for j in 0..t {
                    let kj = &k[j * d + off..j * d + off + dh];
                    row[j] = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * inv_sqrt;
                }
                softmax_in_place(row);
                for j in 0..t {
                    let pij = row[j];
                    for e in 0..dh {
                        o[i * d + off + e] += pij * v[j * d + off + e];
                    }
                }
            }
            probs.push(p);
        }

        let mut attn = mm(&o, &l.wo.data, t, d, d);
        add_bias(&mut attn, &l.bo.data);
        add_into(&mut x, &attn);

        let (b, ln2) = layer_norm(&x, d, &l.ln2_gain.data, &l.ln2_bias.data);
        let mut h1 = mm(&b, &l.ff1_w.data, t, d, ff);
        add_bias(&mut h1, &l.ff1_b.data);
        let g: Vec<f64> = h1.iter().map(|&v| gelu(v)).collect();
        let mut f2 = mm(&g, &l.ff2_w.data, t, ff, d);
        add_bias(&mut f2, &l.ff2_b.data);
        add_into(&mut x, &f2);

        layers.push(LayerCache { ln1, a, q, k, v, probs, o, ln2, b, h1, g });
    }

    let (z, lnf) = layer_norm(&x[..d], d, &w.lnf_gain.data, &w.lnf_bias.data);
    let mut logits = mm(&z, &w.head_w.data, 1, d, cfg.n_classes);
    add_into(&mut logits, &w.head_b.data);
    ForwardCache { tokens: tokens.to_vec(), layers, lnf, z, logits }
}

/// Accumulates `dL/dweights` into `grads` given `dL/dlogits`.
pub fn backward(w: &Weights, cache: &ForwardCache, dlogits: &[f64], grads: &mut Gradients) {
    let cfg = &w.cfg;
    let (d, ff, nh, dh) = (cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.head_dim());
    let t = cfg.n_tokens;
    let nc = cfg.n_classes;
    let inv_sqrt = 1.0 / (dh as f64).sqrt();

    mm_tn_acc(&mut grads.head_w.data, &cache.z, dlogits, 1, d, nc);
    add_into(&mut grads.head_b.data, dlogits);
    let dz = mm_nt(dlogits, &w.head_w.data, 1, nc, d);
    let dx0 = layer_norm_back(
        &dz,
        &cache.lnf,
        &w.lnf_gain.data,
        d,
        &mut grads.lnf_gain.data,
        &mut grads.lnf_bias.data,
    );
    let mut dx = vec![0.0; t * d];
    dx[..d].copy_from_slice(&dx0);

    for (li, (l, c)) in w.layers.iter().zip(&cache.layers).enumerate().rev() {
        let gl = &mut grads.layers[li];

        // feed-forward branch
        mm_tn_acc(&mut gl.ff2_w.data, &c.g, &dx, t, ff, d);
        col_sum_acc(&mut gl.ff2_b.data, &dx);
        let mut dh1 = mm_nt(&dx, &l.ff2_w.data, t, d, ff);
        for (g, &h) in dh1.iter_mut().zip(&c.h1) {
            *g *= gelu_grad(h);
        }
        mm_tn_acc(&mut gl.ff1_w.data, &c.b, &dh1, t, d, ff);
        col_sum_acc(&mut gl.ff1_b.data, &dh1);
        let db = mm_nt(&dh1, &l.ff1_w.data, t, ff, d);
        let dres = layer_norm_back(
            &db,
            &c.ln2,
            &l.ln2_gain.data,
            d,
            &mut gl.ln2_gain.data,
            &mut gl.ln2_bias.data,
        );
        add_into(&mut dx, &dres);

        // attention branch
        mm_tn_acc(&mut gl.wo.data, &c.o, &dx, t, d, d);
        col_sum_acc(&mut gl.bo.data, &dx);
        let d_o = mm_nt(&dx, &l.wo.data, t, d, d);
        let mut dq = vec![0.0; t * d];
        let mut dk = vec![0.0; t * d];
        let mut dv = vec![0.0; t * d];
        for h in 0..nh {
            let off = h * dh;
            let p = &c.probs[h];
            for i in 0..t {
                let doi = &d_o[i * d + off..i * d + off + dh];
                let mut dp = vec![0.0; t];
                for j in 0..t {
                    let vj = &c.v[j * d + off..j * d + off + dh];
                    dp[j] = doi.iter().zip(vj).map(|(a, b)| a * b).sum();
                    let pij = p[i * t + j];
                    for e in 0..dh {
                        dv[j * d + off + e] += pij * doi[e];
                    }
                }
                let dot: f64 = (0..t).map(|j| dp[j] * p[i * t + j]).sum();
                for j in 0..t {
                    let ds = p[i * t + j] * (dp[j] - dot) * inv_sqrt;
                    if ds == 0.0 {
                        continue;
                    }
                    for e in 0..dh {
                        dq[i * d + off + e] += ds * c.k[j * d + off + e];
                        dk[j * d + off + e] += ds * c.q[i * d + off + e];
                    }
                }
            }
        }
        let mut da = vec![0.0; t * d];
        for (dmat, wmat, gw, gb) in [
            (&dq, &l.wq, &mut gl.wq, &mut gl.bq),
            (&dk, &l.wk, &mut gl.wk, &mut gl.bk),
            (&dv, &l.wv, &mut gl.wv, &mut gl.bv),
        ] {
            mm_tn_acc(&mut gw.data, &c.a, dmat, t, d, d);
            col_sum_acc(&mut gb.data, dmat);
            add_into(&mut da, &mm_nt(dmat, &wmat.data, t, d, d));
        }
        let dres = layer_norm_back(
            &da,
            &c.ln1,
            &l.ln1_gain.data,
            d,
            &mut gl.ln1_gain.data,
            &mut gl.ln1_bias.data,
        );
        add_into(&mut dx, &dres);
    }

    add_into(&mut grads.summary_token.data, &dx[..d]);
    let dchan = &dx[d..];
    add_into(&mut grads.channel_emb.data, dchan);
    col_sum_acc(&mut grads.proj_b.data, dchan);
    mm_tn_acc(&mut grads.proj_w.data, &cache.tokens, dchan, N_CHANNELS, cfg.token_dim, d);
}

fn softmax_in_place(x: &mut [f64]) {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in x.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in x.iter_mut() {
        *v /= s;
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut p = logits.to_vec();
    softmax_in_place(&mut p);
    p
}

/// Cross-entropy of the true label, `logsumexp(logits) - logits[label]`.
pub fn loss_ce(logits: &[f64], label: ClassLabel) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    (lse - logits[label.index()]).max(0.0)
}

/// Training target: a class, or the uniform distribution for windows that
/// carry no class signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Class(ClassLabel),
    Uniform,
}

/// Cross-entropy against a target distribution; equals [`loss_ce`] for a class.
pub fn loss_target(logits: &[f64], target: Target) -> f64 {
    match target {
        Target::Class(l) => loss_ce(logits, l),
        Target::Uniform => {
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - logits.iter().sum::<f64>() / logits.len() as f64
        }
    }
}

/// Mean loss over `batch` and its exact gradient.
pub fn loss_and_gradients_targets(w: &Weights, batch: &[(&[f64], Target)]) -> (f64, Gradients) {
    let mut grads = w.zeros_like();
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for (tokens, target) in batch {
        let cache = forward_cached(w, tokens);
        loss += loss_target(&cache.logits, *target);
        let mut dlogits = softmax(&cache.logits);
        match target {
            Target::Class(l) => dlogits[l.index()] -= 1.0,
            Target::Uniform => {
                let u = 1.0 / dlogits.len() as f64;
                dlogits.iter_mut().for_each(|v| *v -= u);
            }
        }
        dlogits.iter_mut().for_each(|v| *v *= scale);
        backward(w, &cache, &dlogits, &mut grads);
    }
    (loss * scale, grads)
}

/// Mean cross-entropy over labelled token matrices and its exact gradient.
pub fn loss_and_gradients(w: &Weights, batch: &[(&[f64], ClassLabel)]) -> (f64, Gradients) {
    let targets: Vec<(&[f64], Target)> = batch.iter().map(|(t, l)| (*t, Target::Class(*l))).collect();
    loss_and_gradients_targets(w, &targets)
}

/// Gradient of the mean batch loss with respect to every trainable array.
pub fn gradients(w: &Weights, batch: &[(FeatureVector, ClassLabel)]) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(crate::Error::InvalidParameter("empty batch".into()));
    }
    let tokens = batch
        .iter()
        .map(|(f, _)| {
            f.check_layout()?;
            Ok(input_tokens(&w.norm, f))
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(&[f64], ClassLabel)> =
        tokens.iter().zip(batch).map(|(t, (_, l))| (t.as_slice(), *l)).collect();
    Ok(loss_and_gradients(w, &pairs).1)
}
