//! Trunk forward pass with activation caching, and its backward pass.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Layout, ModelState, Scalar};
use crate::{Error, Result};

const LN_EPS: f64 = 1e-5;

struct LayerNormCache<S> {
    xhat: Vec<S>,
    rstd: Vec<S>,
}

struct BlockTrace<S> {
    ln1: LayerNormCache<S>,
    a: Vec<S>,
    qkv: Vec<S>,
    att: Vec<S>,
    ctx: Vec<S>,
    attn_drop: Vec<S>,
    ln2: LayerNormCache<S>,
    m: Vec<S>,
    f: Vec<S>,
    g: Vec<S>,
    mlp_drop: Vec<S>,
}

/// Cached activations of one sequence through the trunk.
pub(crate) struct Trace<S> {
    pub len: usize,
    ids: Vec<u32>,
    emb_drop: Vec<S>,
    blocks: Vec<BlockTrace<S>>,
    lnf: LayerNormCache<S>,
    /// Final layer-normed hidden states, `[len, d_model]`.
    pub hidden: Vec<S>,
}

pub(crate) fn check_ids<S: Scalar>(state: &ModelState<S>, ids: &[u32]) -> Result<()> {
    if ids.is_empty() {
        return Err(Error::EmptyInput("token sequence"));
    }
    if ids.len() > state.config.max_seq_len {
        return Err(Error::SequenceTooLong {
            len: ids.len(),
            max: state.config.max_seq_len,
        });
    }
    if let Some(&id) = ids.iter().find(|&&id| id as usize >= state.config.vocab_size) {
        return Err(Error::TokenOutOfRange {
            id,
            size: state.config.vocab_size,
        });
    }
    Ok(())
}

/// Runs the trunk. With `rng` set and a positive dropout rate, dropout
/// masks are drawn and applied.
pub(crate) fn forward<S: Scalar>(state: &ModelState<S>, ids: &[u32], rng: Option<&mut ChaCha8Rng>) -> Result<Trace<S>> {
    check_ids(state, ids)?;
    let cfg = &state.config;
    let l = state.layout();
    let p = &state.params[..];
    let (t_len, d, ff) = (ids.len(), cfg.d_model, cfg.d_ff);
    let mut rng = rng.filter(|_| cfg.dropout > 0.0);

    let mut x = vec![S::zero(); t_len * d];
    for (t, &id) in ids.iter().enumerate() {
        let tok = &p[l.tok_emb + id as usize * d..][..d];
        let pos = &p[l.pos_emb + t * d..][..d];
        for j in 0..d {
            x[t * d + j] = tok[j] + pos[j];
        }
    }
    let emb_drop = dropout_mask(&mut rng, cfg.dropout, t_len * d);
    apply_mask(&mut x, &emb_drop);

    let mut blocks = Vec::with_capacity(cfg.n_layers);
    for off in &l.layers {
        let (a, ln1) = layer_norm(&x, t_len, d, &p[off.ln1..]);
        let mut qkv = vec![S::zero(); t_len * 3 * d];
        linear(&a, t_len, d, &p[off.qkv..], 3 * d, &mut qkv);
        let (ctx, att) = attention(&qkv, t_len, d, cfg.n_heads);
        let mut o = vec![S::zero(); t_len * d];
        linear(&ctx, t_len, d, &p[off.attn_out..], d, &mut o);
        let attn_drop = dropout_mask(&mut rng, cfg.dropout, t_len * d);
        apply_mask(&mut o, &attn_drop);
        for (xi, oi) in x.iter_mut().zip(&o) {
            *xi = *xi + *oi;
        }

        let (m, ln2) = layer_norm(&x, t_len, d, &p[off.ln2..]);
        let mut f = vec![S::zero(); t_len * ff];
        linear(&m, t_len, d, &p[off.fc..], ff, &mut f);
        let g: Vec<S> = f.iter().map(|&v| gelu(v)).collect();
        let mut out = vec![S::zero(); t_len * d];
        linear(&g, t_len, ff, &p[off.proj..], d, &mut out);
        let mlp_drop = dropout_mask(&mut rng, cfg.dropout, t_len * d);
        apply_mask(&mut out, &mlp_drop);
        for (xi, oi) in x.iter_mut().zip(&out) {
            *xi = *xi + *oi;
        }
        blocks.push(BlockTrace {
            ln1,
            a,
            qkv,
            att,
            ctx,
            attn_drop,
            ln2,
            m,
            f,
            g,
            mlp_drop,
        });
    }
    let (hidden, lnf) = layer_norm(&x, t_len, d, &p[l.ln_f..]);
    Ok(Trace {
        len: t_len,
        ids: ids.to_vec(),
        emb_drop,
        blocks,
        lnf,
        hidden,
    })
}

/// Accumulates parameter gradients into `grads` given the gradient of the
/// loss with respect to `trace.hidden`.
pub(crate) fn backward<S: Scalar>(state: &ModelState<S>, trace: &Trace<S>, d_hidden: &[S], grads: &mut [S]) {
    let cfg = &state.config;
    let l: Layout = state.layout();
    let p = &state.params[..];
    let (t_len, d, ff) = (trace.len, cfg.d_model, cfg.d_ff);

    let mut dx = vec![S::zero(); t_len * d];
    layer_norm_back(d_hidden, &trace.lnf, t_len, d, &p[l.ln_f..], &mut dx, &mut grads[l.ln_f..]);

    for (off, b) in l.layers.iter().zip(&trace.blocks).rev() {
        // MLP branch
        let mut dout = dx.clone();
        apply_mask(&mut dout, &b.mlp_drop);
        let mut dg = vec![S::zero(); t_len * ff];
        linear_back(&dout, &b.g, t_len, ff, &p[off.proj..], d, &mut dg, &mut grads[off.proj..]);
        let df: Vec<S> = dg.iter().zip(&b.f).map(|(&g, &f)| g * gelu_grad(f)).collect();
        let mut dm = vec![S::zero(); t_len * d];
        linear_back(&df, &b.m, t_len, d, &p[off.fc..], ff, &mut dm, &mut grads[off.fc..]);
        layer_norm_back(&dm, &b.ln2, t_len, d, &p[off.ln2..], &mut dx, &mut grads[off.ln2..]);

        // attention branch
        let mut dout = dx.clone();
        apply_mask(&mut dout, &b.attn_drop);
        let mut dctx = vec![S::zero(); t_len * d];
        linear_back(&dout, &b.ctx, t_len, d, &p[off.attn_out..], d, &mut dctx, &mut grads[off.attn_out..]);
        let dqkv = attention_back(&dctx, &b.qkv, &b.att, t_len, d, cfg.n_heads);
        let mut da = vec![S::zero(); t_len * d];
        linear_back(&dqkv, &b.a, t_len, d, &p[off.qkv..], 3 * d, &mut da, &mut grads[off.qkv..]);
        layer_norm_back(&da, &b.ln1, t_len, d, &p[off.ln1..], &mut dx, &mut grads[off.ln1..]);
    }

    apply_mask(&mut dx, &trace.emb_drop);
    for (t, &id) in trace.ids.iter().enumerate() {
        let tok = l.tok_emb + id as usize * d;
        let pos = l.pos_emb + t * d;
        for j in 0..d {
            grads[tok + j] = grads[tok + j] + dx[t * d + j];
            grads[pos + j] = grads[pos + j] + dx[t * d + j];
        }
    }
}

fn dropout_mask<S: Scalar>(rng: &mut Option<&mut ChaCha8Rng>, rate: f64, n: usize) -> Vec<S> {
    match rng {
        Some(rng) => {
            let keep = S::of(1.0 / (1.0 - rate));
            (0..n)
                .map(|_| if rng.random::<f64>() < rate { S::zero() } else { keep })
                .collect()
        }
        None => Vec::new(),
    }
}

fn apply_mask<S: Scalar>(x: &mut [S], mask: &[S]) {
    if !mask.is_empty() {
        x.iter_mut().zip(mask).for_each(|(v, &m)| *v = *v * m);
    }
}

/// `y[rows, out] = x[rows, inp] · W[inp, out] + b`, reading `W` then `b`
/// from the front of `wb`.
pub(crate) fn linear<S: Scalar>(x: &[S], rows: usize, inp: usize, wb: &[S], out: usize, y: &mut [S]) {
    let (w, b) = wb.split_at(inp * out);
    for r in 0..rows {
        let yr = &mut y[r * out..(r + 1) * out];
        yr.copy_from_slice(&b[..out]);
        for (i, &xv) in x[r * inp..(r + 1) * inp].iter().enumerate() {
            let wr = &w[i * out..(i + 1) * out];
            for (yo, &wv) in yr.iter_mut().zip(wr) {
                *yo = *yo + xv * wv;
            }
        }
    }
}

/// Backward of [`linear`]: accumulates into `dx` and into the weight and
/// bias gradients at the front of `dwb`.
#[allow(clippy::too_many_arguments)]
fn linear_back<S: Scalar>(dy: &[S], x: &[S], rows: usize, inp: usize, wb: &[S], out: usize, dx: &mut [S], dwb: &mut [S]) {
    let w = &wb[..inp * out];
    let (dw, db) = dwb.split_at_mut(inp * out);
    for r in 0..rows {
        let dyr = &dy[r * out..(r + 1) * out];
        for (dbo, &g) in db[..out].iter_mut().zip(dyr) {
            *dbo = *dbo + g;
        }
        for i in 0..inp {
            let wr = &w[i * out..(i + 1) * out];
            let mut acc = S::zero();
            for (&wv, &g) in wr.iter().zip(dyr) {
                acc = acc + wv * g;
            }
            dx[r * inp + i] = dx[r * inp + i] + acc;
            let xv = x[r * inp + i];
            for (dwv, &g) in dw[i * out..(i + 1) * out].iter_mut().zip(dyr) {
                *dwv = *dwv + xv * g;
            }
        }
    }
}

fn layer_norm<S: Scalar>(x: &[S], rows: usize, d: usize, gb: &[S]) -> (Vec<S>, LayerNormCache<S>) {
    let (g, b) = (&gb[..d], &gb[d..2 * d]);
    let n = S::of(d as f64);
    let mut y = vec![S::zero(); rows * d];
    let mut xhat = vec![S::zero(); rows * d];
    let mut rstd = vec![S::zero(); rows];
    for r in 0..rows {
        let xr = &x[r * d..(r + 1) * d];
        let mean = xr.iter().copied().sum::<S>() / n;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / n;
        let rs = S::one() / (var + S::of(LN_EPS)).sqrt();
        rstd[r] = rs;
        for j in 0..d {
            let h = (xr[j] - mean) * rs;
            xhat[r * d + j] = h;
            y[r * d + j] = h * g[j] + b[j];
        }
    }
    (y, LayerNormCache { xhat, rstd })
}

fn layer_norm_back<S: Scalar>(
    dy: &[S],
    cache: &LayerNormCache<S>,
    rows: usize,
    d: usize,
    gb: &[S],
    dx: &mut [S],
    dgb: &mut [S],
) {
    let g = &gb[..d];
    let (dg, db) = dgb.split_at_mut(d);
    let n = S::of(d as f64);
    let mut dxhat = vec![S::zero(); d];
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let mut mean_dxhat = S::zero();
        let mut mean_dxhat_xhat = S::zero();
        for j in 0..d {
            dg[j] = dg[j] + dyr[j] * xh[j];
            db[j] = db[j] + dyr[j];
            dxhat[j] = dyr[j] * g[j];
            mean_dxhat = mean_dxhat + dxhat[j];
            mean_dxhat_xhat = mean_dxhat_xhat + dxhat[j] * xh[j];
        }
        mean_dxhat = mean_dxhat / n;
        mean_dxhat_xhat = mean_dxhat_xhat / n;
        let rs = cache.rstd[r];
        for j in 0..d {
            dx[r * d + j] = dx[r * d + j] + rs * (dxhat[j] - mean_dxhat - xh[j] * mean_dxhat_xhat);
        }
    }
}

/// Causal multi-head attention over packed `[q | k | v]` rows. Returns the
/// concatenated head outputs and the attention weights `[head, t, s]`.
fn attention<S: Scalar>(qkv: &[S], t_len: usize, d: usize, heads: usize) -> (Vec<S>, Vec<S>) {
    let hd = d / heads;
    let scale = S::one() / S::of(hd as f64).sqrt();
    let mut ctx = vec![S::zero(); t_len * d];
    let mut att = vec![S::zero(); heads * t_len * t_len];
    let row = 3 * d;
    for h in 0..heads {
        for t in 0..t_len {
            let q = &qkv[t * row + h * hd..][..hd];
            let a = &mut att[(h * t_len + t) * t_len..][..t_len];
            let mut max = S::neg_infinity();
            for s in 0..=t {
                let k = &qkv[s * row + d + h * hd..][..hd];
                let score = q.iter().zip(k).map(|(&x, &y)| x * y).sum::<S>() * scale;
                a[s] = score;
                if score > max {
                    max = score;
                }
            }
            let mut z = S::zero();
            for v in &mut a[..=t] {
                *v = (*v - max).exp();
                z = z + *v;
            }
            for v in &mut a[..=t] {
                *v = *v / z;
            }
            let c = &mut ctx[t * d + h * hd..][..hd];
            for s in 0..=t {
                let v = &qkv[s * row + 2 * d + h * hd..][..hd];
                for (ci, &vi) in c.iter_mut().zip(v) {
                    *ci = *ci + a[s] * vi;
                }
            }
        }
    }
    (ctx, att)
}

fn attention_back<S: Scalar>(dctx: &[S], qkv: &[S], att: &[S], t_len: usize, d: usize, heads: usize) -> Vec<S> {
    let hd = d / heads;
    let scale = S::one() / S::of(hd as f64).sqrt();
    let row = 3 * d;
    let mut dqkv = vec![S::zero(); t_len * row];
    let mut datt = vec![S::zero(); t_len];
    for h in 0..heads {
        for t in 0..t_len {
            let a = &att[(h * t_len + t) * t_len..][..t_len];
            let dc = &dctx[t * d + h * hd..][..hd];
            let mut dot = S::zero();
            for s in 0..=t {
                let v = &qkv[s * row + 2 * d + h * hd..][..hd];
                datt[s] = dc.iter().zip(v).map(|(&x, &y)| x * y).sum::<S>();
                dot = dot + a[s] * datt[s];
                let dv = &mut dqkv[s * row + 2 * d + h * hd..][..hd];
                for (dvi, &g) in dv.iter_mut().zip(dc) {
                    *dvi = *dvi + a[s] * g;
                }
            }
            for s in 0..=t {
                let ds = a[s] * (datt[s] - dot) * scale;
                for j in 0..hd {
                    let qj = qkv[t * row + h * hd + j];
                    let kj = qkv[s * row + d + h * hd + j];
                    dqkv[t * row + h * hd + j] = dqkv[t * row + h * hd + j] + ds * kj;
                    dqkv[s * row + d + h * hd + j] = dqkv[s * row + d + h * hd + j] + ds * qj;
                }
            }
        }
    }
    dqkv
}

fn gelu<S: Scalar>(x: S) -> S {
    let c = S::of(0.797_884_560_802_865_4);
    let u = c * (x + S::of(0.044715) * x * x * x);
    S::of(0.5) * x * (S::one() + u.tanh())
}

fn gelu_grad<S: Scalar>(x: S) -> S {
    let c = S::of(0.797_884_560_802_865_4);
    let u = c * (x + S::of(0.044715) * x * x * x);
    let th = u.tanh();
    let du = c * (S::one() + S::of(3.0 * 0.044715) * x * x);
    S::of(0.5) * (S::one() + th) + S::of(0.5) * x * (S::one() - th * th) * du
}
