//! Language-model and classification heads, their losses, and the joint
//! loss gradient.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use super::trace::{self, Trace};
use super::{ModelState, Scalar};
use crate::corpus::{Dataset, LabelSlice, NUM_CLASSES};
use crate::tokenizer::TokenSequence;
use crate::{Error, Result};

/// A rendered classification sequence with its merged gold label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClsExample {
    pub ids: Vec<u32>,
    pub dataset: Dataset,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Losses<S> {
    pub lm: S,
    pub cls: S,
    pub total: S,
}

fn lm_logits_row<S: Scalar>(state: &ModelState<S>, h: &[S]) -> Vec<S> {
    let d = state.config.d_model;
    let emb = &state.params[state.layout().tok_emb..][..state.config.vocab_size * d];
    emb.chunks_exact(d)
        .map(|e| e.iter().zip(h).map(|(&a, &b)| a * b).sum())
        .collect()
}

fn cls_logits<S: Scalar>(state: &ModelState<S>, h: &[S]) -> [S; NUM_CLASSES] {
    let d = state.config.d_model;
    let off = state.layout().cls;
    let mut out = [S::zero(); NUM_CLASSES];
    trace::linear(h, 1, d, &state.params[off..], NUM_CLASSES, &mut out);
    out
}

/// Next-token logits for every position, `[len][vocab]`.
pub fn forward_lm<S: Scalar>(state: &ModelState<S>, ids: &[u32]) -> Result<Vec<Vec<S>>> {
    let tr = trace::forward(state, ids, None)?;
    let d = state.config.d_model;
    Ok(tr.hidden.chunks_exact(d).map(|h| lm_logits_row(state, h)).collect())
}

/// Logits for the token following `ids`.
pub fn next_token_logits<S: Scalar>(state: &ModelState<S>, ids: &[u32]) -> Result<Vec<S>> {
    let tr = trace::forward(state, ids, None)?;
    let d = state.config.d_model;
    Ok(lm_logits_row(state, &tr.hidden[(tr.len - 1) * d..]))
}

/// Mean next-token cross-entropy over positions whose mask is set. Position
/// `t` is predicted from the logits at `t - 1`.
pub fn lm_loss<S: Scalar>(logits: &[Vec<S>], ids: &[u32], loss_mask: &[bool]) -> Result<S> {
    if logits.len() != ids.len() || loss_mask.len() != ids.len() {
        return Err(Error::LengthMismatch {
            what: "logits, ids and loss mask",
            left: logits.len(),
            right: ids.len(),
        });
    }
    let mut total = S::zero();
    let mut n = 0usize;
    for t in 1..ids.len() {
        if loss_mask[t] {
            total = total + cross_entropy(&logits[t - 1], ids[t] as usize);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoSupervisedPositions);
    }
    Ok(total / S::of(n as f64))
}

fn log_sum_exp<S: Scalar>(xs: &[S]) -> S {
    let max = xs.iter().copied().fold(S::neg_infinity(), S::max);
    max + xs.iter().map(|&x| (x - max).exp()).sum::<S>().ln()
}

fn cross_entropy<S: Scalar>(logits: &[S], target: usize) -> S {
    log_sum_exp(logits) - logits[target]
}

/// Softmax restricted to `slice`; every other entry is exactly zero.
pub fn masked_softmax<S: Scalar>(logits: &[S; NUM_CLASSES], slice: LabelSlice) -> [S; NUM_CLASSES] {
    let r = slice.range();
    let lse = log_sum_exp(&logits[r.clone()]);
    let mut out = [S::zero(); NUM_CLASSES];
    for i in r {
        out[i] = (logits[i] - lse).exp();
    }
    out
}

/// Merged-head label distribution for a rendered classification sequence,
/// read at the final position and masked to the dataset's label slice.
pub fn classification_distribution<S: Scalar>(
    state: &ModelState<S>,
    ids: &[u32],
    dataset: Dataset,
) -> Result<[S; NUM_CLASSES]> {
    let slice = dataset.label_slice().ok_or(Error::NoLabelSlice(dataset))?;
    let tr = trace::forward(state, ids, None)?;
    let d = state.config.d_model;
    let logits = cls_logits(state, &tr.hidden[(tr.len - 1) * d..]);
    Ok(masked_softmax(&logits, slice))
}

/// Joint loss `lm_weight * lm + cls_weight * cls` and its gradient with
/// respect to every parameter.
///
/// The LM term is the token-level mean over all supervised positions in
/// `gen`; the classification term is the mean over `cls`. An empty batch
/// contributes a zero term. A zero weight skips that head's backward pass.
pub fn loss_and_grad<S: Scalar>(
    state: &ModelState<S>,
    gen: &[TokenSequence],
    cls: &[ClsExample],
    lm_weight: S,
    cls_weight: S,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(Losses<S>, Vec<S>)> {
    if gen.is_empty() && cls.is_empty() {
        return Err(Error::EmptyInput("training batch"));
    }
    let d = state.config.d_model;
    let mut grads = vec![S::zero(); state.params.len()];

    let n_tok: usize = gen.iter().map(|s| s.loss_mask.iter().skip(1).filter(|&&m| m).count()).sum();
    if !gen.is_empty() && n_tok == 0 {
        return Err(Error::NoSupervisedPositions);
    }
    let mut lm_sum = S::zero();
    let lm_scale = if n_tok > 0 { lm_weight / S::of(n_tok as f64) } else { S::zero() };
    let emb_off = state.layout().tok_emb;
    for seq in gen {
        if seq.loss_mask.len() != seq.ids.len() {
            return Err(Error::LengthMismatch {
                what: "ids and loss mask",
                left: seq.ids.len(),
                right: seq.loss_mask.len(),
            });
        }
        let tr = trace::forward(state, &seq.ids, rng.as_deref_mut())?;
        let mut d_hidden = vec![S::zero(); tr.len * d];
        for t in 1..tr.len {
            if !seq.loss_mask[t] {
                continue;
            }
            let h = &tr.hidden[(t - 1) * d..t * d];
            let logits = lm_logits_row(state, h);
            let target = seq.ids[t] as usize;
            let lse = log_sum_exp(&logits);
            lm_sum = lm_sum + (lse - logits[target]);
            if lm_weight == S::zero() {
                continue;
            }
            let dh = &mut d_hidden[(t - 1) * d..t * d];
            for (v, &z) in logits.iter().enumerate() {
                let mut g = (z - lse).exp();
                if v == target {
                    g = g - S::one();
                }
                let g = g * lm_scale;
                let e = &state.params[emb_off + v * d..][..d];
                let ge = &mut grads[emb_off + v * d..][..d];
                for j in 0..d {
                    dh[j] = dh[j] + g * e[j];
                    ge[j] = ge[j] + g * h[j];
                }
            }
        }
        if lm_weight != S::zero() {
            trace::backward(state, &tr, &d_hidden, &mut grads);
        }
    }

    let mut cls_sum = S::zero();
    let cls_scale = if cls.is_empty() { S::zero() } else { cls_weight / S::of(cls.len() as f64) };
    let cls_off = state.layout().cls;
    for ex in cls {
        let slice = ex.dataset.label_slice().ok_or(Error::NoLabelSlice(ex.dataset))?;
        if !slice.contains(ex.label) {
            return Err(Error::LabelOutOfSlice {
                dataset: ex.dataset,
                label: ex.label,
            });
        }
        let active = cls_weight != S::zero();
        let tr: Trace<S> = trace::forward(state, &ex.ids, if active { rng.as_deref_mut() } else { None })?;
        let last = tr.len - 1;
        let h = &tr.hidden[last * d..];
        let logits = cls_logits(state, h);
        let lse = log_sum_exp(&logits[slice.range()]);
        cls_sum = cls_sum + (lse - logits[ex.label]);
        if !active {
            continue;
        }
        let probs = masked_softmax(&logits, slice);
        let mut d_hidden = vec![S::zero(); tr.len * d];
        let dh = &mut d_hidden[last * d..];
        let (gw, gb) = grads[cls_off..].split_at_mut(d * NUM_CLASSES);
        let w = &state.params[cls_off..cls_off + d * NUM_CLASSES];
        for c in slice.range() {
            let mut g = probs[c];
            if c == ex.label {
                g = g - S::one();
            }
            let g = g * cls_scale;
            gb[c] = gb[c] + g;
            for j in 0..d {
                gw[j * NUM_CLASSES + c] = gw[j * NUM_CLASSES + c] + g * h[j];
                dh[j] = dh[j] + g * w[j * NUM_CLASSES + c];
            }
        }
        trace::backward(state, &tr, &d_hidden, &mut grads);
    }

    let lm = if n_tok > 0 { lm_sum / S::of(n_tok as f64) } else { S::zero() };
    let cls_loss = if cls.is_empty() { S::zero() } else { cls_sum / S::of(cls.len() as f64) };
    let total = lm_weight * lm + cls_weight * cls_loss;
    Ok((Losses { lm, cls: cls_loss, total }, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, ModelConfig};

    fn tiny() -> ModelState<f64> {
        init_model(&ModelConfig {
            n_layers: 1,
            d_model: 8,
            n_heads: 2,
            d_ff: 16,
            vocab_size: 32,
            max_seq_len: 16,
            seed: 3,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn uniform_logits_give_log_vocab() {
        let v = 32;
        let logits = vec![vec![0.25f64; v]; 4];
        let loss = lm_loss(&logits, &[1, 9, 10, 2], &[false, true, true, true]).unwrap();
        assert!((loss - (v as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_logits_give_zero_loss() {
        let ids = [1u32, 9, 10, 2];
        let logits: Vec<Vec<f64>> = (0..4)
            .map(|t| {
                let mut row = vec![-1e4; 32];
                if t + 1 < 4 {
                    row[ids[t + 1] as usize] = 1e4;
                }
                row
            })
            .collect();
        assert_eq!(lm_loss(&logits, &ids, &[false, true, true, true]).unwrap(), 0.0);
        assert_eq!(
            lm_loss(&logits, &ids, &[false; 4]).unwrap_err(),
            Error::NoSupervisedPositions
        );
    }

    #[test]
    fn lm_loss_ignores_unmasked_positions() {
        let m = tiny();
        let ids = [1u32, 5, 12, 3, 20, 21, 2];
        let mask = [false, false, false, false, true, true, true];
        let logits = forward_lm(&m, &ids).unwrap();
        let mut other = logits.clone();
        for row in &mut other[..3] {
            row.iter_mut().for_each(|v| *v += 100.0);
        }
        assert_eq!(lm_loss(&logits, &ids, &mask).unwrap(), lm_loss(&other, &ids, &mask).unwrap());
    }

    #[test]
    fn lm_loss_matches_scalar_recomputation() {
        let m = tiny();
        let ids = [1u32, 5, 12, 3, 20, 21, 2];
        let mask = [false, false, false, false, true, true, true];
        let logits = forward_lm(&m, &ids).unwrap();
        let mut total = 0.0;
        for t in 4..7 {
            let row = &logits[t - 1];
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            total += -(row[ids[t] as usize].exp() / z).ln();
        }
        let got = lm_loss(&logits, &ids, &mask).unwrap();
        assert!((got - total / 3.0).abs() < 1e-10);
    }

    #[test]
    fn equal_logits_spread_over_slice() {
        let flat = [0.7f64; NUM_CLASSES];
        let p = masked_softmax(&flat, Dataset::Comve.label_slice().unwrap());
        for (i, &v) in p.iter().enumerate() {
            let want = if i < 3 { 1.0 / 3.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-15);
        }
        let p = masked_softmax(&flat, Dataset::Cose.label_slice().unwrap());
        assert!(p[..7].iter().all(|&v| v == 0.0));
        assert!(p[7..].iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn omcs_has_no_label_distribution() {
        let m = tiny();
        assert_eq!(
            classification_distribution(&m, &[1, 8, 3, 2], Dataset::Omcs).unwrap_err(),
            Error::NoLabelSlice(Dataset::Omcs)
        );
    }

    #[test]
    fn forward_rejects_bad_ids() {
        let m = tiny();
        assert!(matches!(forward_lm(&m, &[1, 40]), Err(Error::TokenOutOfRange { id: 40, .. })));
        assert!(matches!(forward_lm(&m, &[1; 17]), Err(Error::SequenceTooLong { .. })));
        assert_eq!(forward_lm(&m, &[1]).unwrap().len(), 1);
    }

    #[test]
    fn weighted_total_is_exact() {
        let m = tiny();
        let gen = [TokenSequence {
            ids: vec![1, 5, 3, 9, 2],
            loss_mask: vec![false, false, false, true, true],
        }];
        let cls = [ClsExample {
            ids: vec![1, 6, 9, 3, 10, 3, 11, 3, 12, 13, 14, 2],
            dataset: Dataset::Cose,
            label: 9,
        }];
        let (l, _) = loss_and_grad(&m, &gen, &cls, 1.0, 1.0, None).unwrap();
        assert_eq!(l.total - (l.lm + l.cls), 0.0);
        let (l2, _) = loss_and_grad(&m, &gen, &cls, 0.5, 2.0, None).unwrap();
        assert_eq!(l2.total, 0.5 * l2.lm + 2.0 * l2.cls);
        let bad = [ClsExample { label: 2, ..cls[0].clone() }];
        assert!(matches!(
            loss_and_grad(&m, &gen, &bad, 1.0, 1.0, None),
            Err(Error::LabelOutOfSlice { .. })
        ));
    }
}
