//! Decoder-only transformer with a tied language-model head and a merged
//! 12-way classification head.
//!
//! All parameters live in one flat vector; [`Layout`] names the ranges.
//! The network is generic over the float type so the same code trains in
//! `f32` and is gradient-checked in `f64`.

mod heads;
mod layout;
mod trace;
mod train;

use alloc::format;
use alloc::vec::Vec;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::NUM_CLASSES;
use crate::tokenizer::Vocab;
use crate::{Error, Result};

pub use heads::{
    classification_distribution, forward_lm, lm_loss, loss_and_grad, masked_softmax, next_token_logits,
    ClsExample, Losses,
};
pub use layout::{Layout, LayerOffsets, ParamGroup};
pub use train::{pretrain_omcs, render_examples, train_union, LossPoint, RenderedData, TrainOutcome, Trainer};

/// Float type the network runs in.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + core::iter::Sum + core::fmt::Debug + Default + Send + Sync + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).unwrap()
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub n_classes: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_layers: 2,
            d_model: 64,
            n_heads: 4,
            d_ff: 256,
            vocab_size: 0,
            max_seq_len: crate::tokenizer::DEFAULT_MAX_SEQ_LEN,
            n_classes: NUM_CLASSES,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.n_layers == 0 || self.d_model == 0 || self.n_heads == 0 || self.d_ff == 0 {
            return bad("layer count and widths must be positive");
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::InvalidConfig(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.vocab_size <= crate::tokenizer::NUM_SPECIALS {
            return bad("vocab_size must exceed the special-token count");
        }
        if self.max_seq_len == 0 {
            return bad("max_seq_len must be positive");
        }
        if self.n_classes != NUM_CLASSES {
            return bad("the classification head has exactly 12 classes");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_steps: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
    pub eval_interval: u64,
    pub lm_weight: f64,
    pub cls_weight: f64,
    /// Train the classification head alongside the LM head.
    pub classification: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 16,
            max_steps: 1000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: 1.0,
            eval_interval: 50,
            lm_weight: 1.0,
            cls_weight: 1.0,
            classification: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.learning_rate,
            self.beta1,
            self.beta2,
            self.epsilon,
            self.clip_norm,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(Error::InvalidConfig("optimizer settings out of range".into()));
        }
        if self.batch_size == 0 || self.eval_interval == 0 {
            return Err(Error::InvalidConfig("batch_size and eval_interval must be positive".into()));
        }
        if !(self.lm_weight >= 0.0 && self.cls_weight >= 0.0) {
            return Err(Error::InvalidConfig("loss weights must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Configuration plus every trainable parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<S> {
    pub config: ModelConfig,
    pub params: Vec<S>,
    /// Fingerprint of the vocabulary the model was built for, if bound.
    pub vocab_hash: Option<u64>,
}

/// Scaled-normal initialization determined entirely by `config.seed`.
pub fn init_model<S: Scalar>(config: &ModelConfig) -> Result<ModelState<S>> {
    config.validate()?;
    let layout = Layout::new(config);
    let mut params = alloc::vec![S::zero(); layout.total];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let std = 0.02;
    let proj_std = std / ((2 * config.n_layers) as f64).sqrt();
    let mut fill = |range: core::ops::Range<usize>, sd: f64, params: &mut [S]| {
        let dist = Normal::new(0.0, sd).unwrap();
        for p in &mut params[range] {
            *p = S::of(dist.sample(&mut rng));
        }
    };
    for g in layout.groups() {
        let range = g.offset..g.offset + g.len;
        match g.kind {
            layout::Kind::Weight => fill(range, std, &mut params),
            layout::Kind::ResidualWeight => fill(range, proj_std, &mut params),
            layout::Kind::Gain => params[range].iter_mut().for_each(|p| *p = S::one()),
            layout::Kind::Bias => {}
        }
    }
    Ok(ModelState {
        config: config.clone(),
        params,
        vocab_hash: None,
    })
}

/// [`init_model`] with `vocab_size` taken from `vocab` and the model bound to it.
pub fn init_model_for<S: Scalar>(config: &ModelConfig, vocab: &Vocab) -> Result<ModelState<S>> {
    let mut config = config.clone();
    config.vocab_size = vocab.len();
    let mut state = init_model(&config)?;
    state.vocab_hash = Some(vocab.fingerprint());
    Ok(state)
}

impl<S: Scalar> ModelState<S> {
    pub fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Hash of the exact bit patterns of all parameters.
    pub fn checksum(&self) -> u64 {
        checksum_of(&self.params)
    }

    /// Hash of the classification head parameters only.
    pub fn cls_head_checksum(&self) -> u64 {
        let l = self.layout();
        checksum_of(&self.params[l.cls_head()])
    }

    pub fn cast<T: Scalar>(&self) -> ModelState<T> {
        ModelState {
            config: self.config.clone(),
            params: self.params.iter().map(|&p| T::of(p.as_f64())).collect(),
            vocab_hash: self.vocab_hash,
        }
    }

    pub fn check_vocab(&self, vocab: &Vocab) -> Result<()> {
        let hash_ok = self.vocab_hash.map_or(true, |h| h == vocab.fingerprint());
        if !hash_ok || self.config.vocab_size != vocab.len() {
            return Err(Error::VocabMismatch);
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

fn checksum_of<S: Scalar>(values: &[S]) -> u64 {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.as_f64().to_bits().to_le_bytes());
    }
    crate::stable_hash(&bytes)
}
