//! Interpolated Kneser-Ney n-gram language model.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // needed only when std is absent from the build
use num_traits::Float;

use super::perplexity::LanguageModel;
use crate::text::word_tokens;
use crate::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;

#[derive(Debug, Clone, Default, PartialEq)]
struct Level {
    /// Raw counts at the top level, continuation counts below it.
    counts: BTreeMap<Vec<u32>, u64>,
    context_total: BTreeMap<Vec<u32>, u64>,
    context_types: BTreeMap<Vec<u32>, u64>,
}

/// Word-level interpolated Kneser-Ney model with one discount per order.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramLM {
    order: usize,
    words: Vec<String>,
    index: BTreeMap<String, u32>,
    levels: Vec<Level>,
    discounts: Vec<f64>,
    warnings: Vec<String>,
}

/// Fits a model of the given order. Sentences are padded with `order - 1`
/// start symbols and one end symbol; tokens seen fewer than `min_count`
/// times become `<unk>`.
pub fn fit_ngram_lm<T: AsRef<str>>(corpus: &[T], order: usize, min_count: usize) -> Result<NGramLM> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("n-gram corpus"));
    }
    if order == 0 {
        return Err(Error::InvalidConfig("n-gram order must be at least 1".into()));
    }
    let tokenized: Vec<Vec<String>> = corpus.iter().map(|t| word_tokens(t.as_ref())).collect();
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for sent in &tokenized {
        for t in sent {
            *freq.entry(t).or_insert(0) += 1;
        }
    }
    let mut words: Vec<String> = vec![BOS.into(), EOS.into(), UNK.into()];
    words.extend(
        freq.iter()
            .filter(|&(w, &c)| c >= min_count.max(1) && ![BOS, EOS, UNK].contains(w))
            .map(|(w, _)| String::from(*w)),
    );
    let index: BTreeMap<String, u32> = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();

    let mut lm = NGramLM {
        order,
        words,
        index,
        levels: vec![Level::default(); order],
        discounts: vec![0.0; order],
        warnings: Vec::new(),
    };
    let padded: Vec<Vec<u32>> = tokenized.iter().map(|s| lm.pad(s)).collect();

    // Distinct windows of each length ending at a predicted position.
    let mut windows: Vec<BTreeSet<&[u32]>> = vec![BTreeSet::new(); order + 1];
    let top = &mut lm.levels[order - 1].counts;
    for sent in &padded {
        for i in order - 1..sent.len() {
            *top.entry(sent[i + 1 - order..=i].to_vec()).or_insert(0) += 1;
            for (n, set) in windows.iter_mut().enumerate().skip(2) {
                if n <= order {
                    set.insert(&sent[i + 1 - n..=i]);
                }
            }
        }
    }
    for n in 1..order {
        let counts = &mut lm.levels[n - 1].counts;
        for w in &windows[n + 1] {
            *counts.entry(w[1..].to_vec()).or_insert(0) += 1;
        }
    }

    for (n, level) in lm.levels.iter_mut().enumerate() {
        for (gram, &c) in &level.counts {
            let ctx = gram[..gram.len() - 1].to_vec();
            *level.context_total.entry(ctx.clone()).or_insert(0) += c;
            *level.context_types.entry(ctx).or_insert(0) += 1;
        }
        let n1 = level.counts.values().filter(|&&c| c == 1).count() as f64;
        let n2 = level.counts.values().filter(|&&c| c == 2).count() as f64;
        lm.discounts[n] = if n1 + 2.0 * n2 == 0.0 || n1 == 0.0 {
            lm.warnings.push(format!(
                "order {}: count-of-counts n1={n1} n2={n2} give no usable discount; using 0.5",
                n + 1
            ));
            0.5
        } else {
            n1 / (n1 + 2.0 * n2)
        };
    }
    Ok(lm)
}

impl NGramLM {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discounts(&self) -> &[f64] {
        &self.discounts
    }

    /// Messages about fallback discounts chosen during fitting.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Predictable symbols: every known word, `</s>` and `<unk>`.
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.words.iter().skip(1).map(String::as_str)
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len() - 1
    }

    fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    fn pad(&self, tokens: &[String]) -> Vec<u32> {
        let mut out = vec![BOS_ID; self.order - 1];
        out.extend(tokens.iter().map(|t| self.id(t)));
        out.push(EOS_ID);
        out
    }

    /// Contexts (of length `order - 1`) observed in training.
    pub fn observed_contexts(&self) -> Vec<Vec<String>> {
        self.levels[self.order - 1]
            .context_total
            .keys()
            .map(|ctx| ctx.iter().map(|&i| self.words[i as usize].clone()).collect())
            .collect()
    }

    /// P(word | context). Only the last `order - 1` context symbols are used;
    /// shorter contexts are left-padded with `<s>`.
    pub fn prob<S: AsRef<str>>(&self, context: &[S], word: &str) -> f64 {
        let mut ctx = vec![BOS_ID; self.order - 1];
        ctx.extend(context.iter().map(|t| match t.as_ref() {
            BOS => BOS_ID,
            other => self.id(other),
        }));
        let ctx = &ctx[ctx.len() - (self.order - 1)..];
        let w = if word == EOS { EOS_ID } else { self.id(word) };
        self.prob_ids(ctx, w)
    }

    fn prob_ids(&self, ctx: &[u32], w: u32) -> f64 {
        let n = ctx.len() + 1;
        let uniform = 1.0 / self.vocab_size() as f64;
        let lower = |this: &Self| {
            if n == 1 {
                uniform
            } else {
                this.prob_ids(&ctx[1..], w)
            }
        };
        let level = &self.levels[n - 1];
        let Some(&total) = level.context_total.get(ctx) else {
            return lower(self);
        };
        let mut gram = ctx.to_vec();
        gram.push(w);
        let c = level.counts.get(&gram).copied().unwrap_or(0) as f64;
        let d = self.discounts[n - 1];
        let types = level.context_types[ctx] as f64;
        ((c - d).max(0.0) + d * types * lower(self)) / total as f64
    }
}

impl LanguageModel for NGramLM {
    fn sentence_log_prob(&self, text: &str) -> (f64, usize) {
        let padded = self.pad(&word_tokens(text));
        let k = self.order - 1;
        let mut lp = 0.0;
        for i in k..padded.len() {
            lp += self.prob_ids(&padded[i - k..i], padded[i]).ln();
        }
        (lp, padded.len() - k)
    }
}
