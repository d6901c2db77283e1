//! Central finite differences of the joint loss on a tiny f64 model.

use union_core::corpus::Dataset;
use union_core::model::{init_model, loss_and_grad, ClsExample, ModelConfig, ModelState};
use union_core::tokenizer::TokenSequence;

pub fn tiny_model(seed: u64) -> ModelState<f64> {
    let mut m: ModelState<f64> = init_model(&ModelConfig {
        n_layers: 1,
        d_model: 8,
        n_heads: 2,
        d_ff: 32,
        vocab_size: 32,
        max_seq_len: 16,
        seed,
        ..Default::default()
    })
    .unwrap();
    // Larger weights than the default init so every path carries signal.
    for (i, p) in m.params.iter_mut().enumerate() {
        *p *= 10.0;
        *p += 0.01 * ((i * 7919 % 101) as f64 / 101.0 - 0.5);
    }
    m
}

pub fn batches() -> (Vec<TokenSequence>, Vec<ClsExample>) {
    let gen = vec![
        TokenSequence {
            ids: vec![1, 5, 12, 13, 14, 3, 20, 21, 2],
            loss_mask: vec![false, false, false, false, false, false, true, true, true],
        },
        TokenSequence {
            ids: vec![1, 8, 3, 30, 31, 9, 2],
            loss_mask: vec![false, false, false, true, true, true, true],
        },
    ];
    let cls = vec![
        ClsExample {
            ids: vec![1, 5, 12, 13, 3, 15, 3, 16, 17, 3, 18, 2],
            dataset: Dataset::Comve,
            label: 2,
        },
        ClsExample {
            ids: vec![1, 6, 22, 3, 10, 3, 11, 3, 12, 3, 19, 3, 25, 2],
            dataset: Dataset::Cose,
            label: 8,
        },
        ClsExample {
            ids: vec![1, 7, 23, 24, 3, 10, 3, 11, 3, 26, 3, 27, 2],
            dataset: Dataset::Openbook,
            label: 3,
        },
    ];
    (gen, cls)
}

/// Central differences at step 1e-5 carry roundoff near 1e-10 in absolute
/// terms, so components smaller than this are compared on an absolute
/// 1e-9 scale instead.
pub const NOISE_FLOOR: f64 = 1e-5;

/// Largest relative error between analytic and central-difference gradients,
/// and the name of the group where it occurs.
pub fn max_relative_error(model: &ModelState<f64>, step: f64) -> (f64, String) {
    let (gen, cls) = batches();
    let (_, grads) = loss_and_grad(model, &gen, &cls, 1.0, 1.0, None).unwrap();
    let mut worst = (0.0f64, String::new());
    let mut probe = model.clone();
    for g in model.layout().groups() {
        for i in g.offset..g.offset + g.len {
            let orig = probe.params[i];
            probe.params[i] = orig + step;
            let up = loss_and_grad(&probe, &gen, &cls, 1.0, 1.0, None).unwrap().0.total;
            probe.params[i] = orig - step;
            let down = loss_and_grad(&probe, &gen, &cls, 1.0, 1.0, None).unwrap().0.total;
            probe.params[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let analytic = grads[i];
            let scale = analytic.abs().max(numeric.abs()).max(NOISE_FLOOR);
            let rel = (analytic - numeric).abs() / scale;
            if rel > worst.0 {
                worst = (rel, format!("{}[{}]", g.name, i - g.offset));
            }
        }
    }
    worst
}
