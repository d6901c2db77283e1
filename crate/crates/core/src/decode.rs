//! Keyword-conditioned explanation generation.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[allow(unused_imports)] // needed only when std is absent from the build
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::model::{next_token_logits, ModelState, Scalar};
use crate::tokenizer::{render_prompt, Special, Vocab};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Greedy,
    TopK,
    Nucleus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub strategy: Strategy,
    /// Candidate count for `top_k`.
    pub k: usize,
    /// Cumulative probability mass for `nucleus`.
    pub p: f64,
    pub temperature: f64,
    pub max_new_tokens: usize,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            strategy: Strategy::Greedy,
            k: 40,
            p: 0.9,
            temperature: 1.0,
            max_new_tokens: 32,
            seed: 0,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidConfig("temperature must be positive".into()));
        }
        if self.max_new_tokens == 0 {
            return Err(Error::InvalidConfig("max_new_tokens must be positive".into()));
        }
        match self.strategy {
            Strategy::TopK if self.k == 0 => Err(Error::InvalidConfig("k must be positive".into())),
            Strategy::Nucleus if !(self.p > 0.0 && self.p <= 1.0) => {
                Err(Error::InvalidConfig("p must lie in (0, 1]".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Continues `[BOS, keyword] ++ source ++ [SEP]` until EOS or
/// `max_new_tokens`. Special tokens other than EOS are never emitted.
pub fn generate<S: Scalar>(
    state: &ModelState<S>,
    vocab: &Vocab,
    keyword: &str,
    source: &str,
    cfg: &DecodeConfig,
) -> Result<String> {
    state.check_vocab(vocab)?;
    cfg.validate()?;
    if source.trim().is_empty() {
        return Err(Error::EmptyText("source"));
    }
    let max_len = state.config.max_seq_len;
    let mut ids = render_prompt(vocab, keyword, source, max_len, 1)?;
    let prompt_len = ids.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    while ids.len() - prompt_len < cfg.max_new_tokens && ids.len() < max_len {
        let logits: Vec<f64> = next_token_logits(state, &ids)?.into_iter().map(Scalar::as_f64).collect();
        let next = choose(&logits, cfg, &mut rng);
        if next == Special::Eos.id() {
            break;
        }
        ids.push(next);
    }
    vocab.decode(&ids[prompt_len..])
}

/// [`generate`] over many sources; item `i` uses seed `cfg.seed ^ i`.
pub fn batch_generate<S: Scalar>(
    state: &ModelState<S>,
    vocab: &Vocab,
    keyword: &str,
    sources: &[String],
    cfg: &DecodeConfig,
) -> Result<Vec<String>> {
    if sources.is_empty() {
        return Err(Error::EmptyInput("sources"));
    }
    sources
        .iter()
        .enumerate()
        .map(|(i, src)| {
            let item_cfg = DecodeConfig {
                seed: cfg.seed ^ i as u64,
                ..cfg.clone()
            };
            generate(state, vocab, keyword, src, &item_cfg).map_err(|e| Error::AtItem {
                index: i,
                error: alloc::boxed::Box::new(e),
            })
        })
        .collect()
}

fn choose(logits: &[f64], cfg: &DecodeConfig, rng: &mut ChaCha8Rng) -> u32 {
    let allowed = |i: usize| i == Special::Eos.id() as usize || !Vocab::is_special(i as u32);
    if cfg.strategy == Strategy::Greedy {
        let mut best = Special::Eos.id() as usize;
        for (i, &z) in logits.iter().enumerate() {
            if allowed(i) && z > logits[best] {
                best = i;
            }
        }
        return best as u32;
    }

    // Temperature first, then truncation.
    let max = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| allowed(i))
        .map(|(_, &z)| z / cfg.temperature)
        .fold(f64::NEG_INFINITY, f64::max);
    let probs: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(i, &z)| if allowed(i) { (z / cfg.temperature - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = probs.iter().sum();

    let mut ranked: Vec<usize> = (0..probs.len()).collect();
    ranked.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut keep = alloc::vec![false; probs.len()];
    match cfg.strategy {
        Strategy::TopK => ranked.iter().take(cfg.k).for_each(|&i| keep[i] = true),
        Strategy::Nucleus => {
            let mut mass = 0.0;
            for &i in &ranked {
                keep[i] = true;
                mass += probs[i] / z;
                if mass >= cfg.p {
                    break;
                }
            }
        }
        Strategy::Greedy => unreachable!(),
    }
    sample_index(&probs, &keep, rng)
}

/// Draws from the renormalized kept entries, scanning in index order so the
/// draw does not depend on how the kept set was chosen.
fn sample_index(probs: &[f64], keep: &[bool], rng: &mut ChaCha8Rng) -> u32 {
    let total: f64 = probs.iter().zip(keep).filter(|(_, &k)| k).map(|(p, _)| p).sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, (&p, &k)) in probs.iter().zip(keep).enumerate() {
        if !k || p == 0.0 {
            continue;
        }
        last = i;
        if u < p {
            return i as u32;
        }
        u -= p;
    }
    last as u32
}
