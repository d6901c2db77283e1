use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::ModelConfig;
use crate::corpus::NUM_CLASSES;

/// Offsets of one transformer block. Each linear map stores its weight
/// (row-major `[in, out]`) immediately followed by its bias; each layer
/// norm stores its gain followed by its bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerOffsets {
    pub ln1: usize,
    pub qkv: usize,
    pub attn_out: usize,
    pub ln2: usize,
    pub fc: usize,
    pub proj: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub vocab: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub max_seq_len: usize,
    pub tok_emb: usize,
    pub pos_emb: usize,
    pub layers: Vec<LayerOffsets>,
    pub ln_f: usize,
    pub cls: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    Weight,
    ResidualWeight,
    Bias,
    Gain,
}

/// A named parameter range, in declared (checkpoint) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamGroup {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub(crate) kind: Kind,
}

impl Layout {
    pub fn new(c: &ModelConfig) -> Layout {
        let (d, ff) = (c.d_model, c.d_ff);
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let tok_emb = take(c.vocab_size * d);
        let pos_emb = take(c.max_seq_len * d);
        let layers = (0..c.n_layers)
            .map(|_| LayerOffsets {
                ln1: take(2 * d),
                qkv: take(d * 3 * d + 3 * d),
                attn_out: take(d * d + d),
                ln2: take(2 * d),
                fc: take(d * ff + ff),
                proj: take(ff * d + d),
            })
            .collect();
        let ln_f = take(2 * d);
        let cls = take(d * NUM_CLASSES + NUM_CLASSES);
        Layout {
            vocab: c.vocab_size,
            d_model: d,
            d_ff: ff,
            max_seq_len: c.max_seq_len,
            tok_emb,
            pos_emb,
            layers,
            ln_f,
            cls,
            total: at,
        }
    }

    /// Parameter range of the classification head.
    pub fn cls_head(&self) -> core::ops::Range<usize> {
        self.cls..self.total
    }

    pub fn groups(&self) -> Vec<ParamGroup> {
        let (d, ff) = (self.d_model, self.d_ff);
        let mut out = Vec::new();
        let mut push = |name: String, offset: usize, len: usize, kind: Kind| {
            out.push(ParamGroup { name, offset, len, kind })
        };
        push("tok_emb".into(), self.tok_emb, self.vocab * d, Kind::Weight);
        push("pos_emb".into(), self.pos_emb, self.max_seq_len * d, Kind::Weight);
        for (i, l) in self.layers.iter().enumerate() {
            let p = |s: &str| format!("layers.{i}.{s}");
            push(p("ln1.gain"), l.ln1, d, Kind::Gain);
            push(p("ln1.bias"), l.ln1 + d, d, Kind::Bias);
            push(p("attn.qkv.weight"), l.qkv, 3 * d * d, Kind::Weight);
            push(p("attn.qkv.bias"), l.qkv + 3 * d * d, 3 * d, Kind::Bias);
            push(p("attn.out.weight"), l.attn_out, d * d, Kind::ResidualWeight);
            push(p("attn.out.bias"), l.attn_out + d * d, d, Kind::Bias);
            push(p("ln2.gain"), l.ln2, d, Kind::Gain);
            push(p("ln2.bias"), l.ln2 + d, d, Kind::Bias);
            push(p("mlp.fc.weight"), l.fc, d * ff, Kind::Weight);
            push(p("mlp.fc.bias"), l.fc + d * ff, ff, Kind::Bias);
            push(p("mlp.proj.weight"), l.proj, ff * d, Kind::ResidualWeight);
            push(p("mlp.proj.bias"), l.proj + ff * d, d, Kind::Bias);
        }
        push("ln_f.gain".into(), self.ln_f, d, Kind::Gain);
        push("ln_f.bias".into(), self.ln_f + d, d, Kind::Bias);
        push("cls_head.weight".into(), self.cls, d * NUM_CLASSES, Kind::Weight);
        push("cls_head.bias".into(), self.cls + d * NUM_CLASSES, NUM_CLASSES, Kind::Bias);
        out
    }
}
