use alloc::vec::Vec;

#[allow(unused_imports)] // needed only when std is absent from the build
use num_traits::Float;

use crate::model::{forward_lm, ModelState, Scalar};
use crate::tokenizer::{render_generation_sequence, Vocab};
use crate::{Error, Result};

/// Anything that scores a sentence: natural-log probability summed over
/// its predicted events, and the number of events (tokens plus one end of
/// sentence).
pub trait LanguageModel {
    fn sentence_log_prob(&self, text: &str) -> (f64, usize);
}

/// `exp` of the negative mean log-probability per event.
pub fn perplexity<M, T>(lm: &M, texts: &[T]) -> Result<f64>
where
    M: LanguageModel + ?Sized,
    T: AsRef<str>,
{
    if texts.is_empty() {
        return Err(Error::EmptyInput("perplexity texts"));
    }
    let (mut lp, mut n) = (0.0, 0usize);
    for t in texts {
        let (l, k) = lm.sentence_log_prob(t.as_ref());
        lp += l;
        n += k;
    }
    Ok((-lp / n as f64).exp())
}

/// Assigns probability `1 / size` to every event.
#[derive(Debug, Clone, Copy)]
pub struct UniformLm {
    pub size: usize,
}

impl LanguageModel for UniformLm {
    fn sentence_log_prob(&self, text: &str) -> (f64, usize) {
        let n = crate::text::word_tokens(text).len() + 1;
        (-(n as f64) * (self.size as f64).ln(), n)
    }
}

/// Scores text with a model's LM head, as the target of an otherwise empty
/// prompt under `keyword`.
#[derive(Debug, Clone)]
pub struct ModelScorer<'a, S> {
    pub state: &'a ModelState<S>,
    pub vocab: &'a Vocab,
    pub keyword: &'a str,
}

impl<S: Scalar> LanguageModel for ModelScorer<'_, S> {
    fn sentence_log_prob(&self, text: &str) -> (f64, usize) {
        let max_len = self.state.config.max_seq_len;
        let Ok(seq) = render_generation_sequence(self.vocab, self.keyword, "", text, max_len) else {
            return (f64::NEG_INFINITY, 1);
        };
        let Ok(logits) = forward_lm(self.state, &seq.ids) else {
            return (f64::NEG_INFINITY, 1);
        };
        let mut lp = 0.0;
        let mut n = 0;
        for t in 1..seq.len() {
            if !seq.loss_mask[t] {
                continue;
            }
            let row: Vec<f64> = logits[t - 1].iter().map(|v| v.as_f64()).collect();
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lp += row[seq.ids[t] as usize] - lse;
            n += 1;
        }
        (lp, n)
    }
}
