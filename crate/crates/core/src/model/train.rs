//! Optimizer, the multi-task step, and the pretraining / fine-tuning loops.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::heads::{loss_and_grad, ClsExample, Losses};
use super::{ModelState, Scalar, TrainConfig};
use crate::corpus::{Dataset, UnifiedExample};
use crate::text::statement_key;
use crate::tokenizer::{render_classification_sequence, render_generation_sequence, TokenSequence, Vocab};
use crate::{Error, Result};

/// Training loss recorded at an evaluation interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossPoint {
    pub step: u64,
    pub loss_lm: f64,
    pub loss_cls: f64,
    pub loss_total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<S> {
    pub state: ModelState<S>,
    pub curve: Vec<LossPoint>,
}

/// Adam with global-norm gradient clipping over a single model.
#[derive(Debug, Clone)]
pub struct Trainer<S> {
    state: ModelState<S>,
    m: Vec<S>,
    v: Vec<S>,
    step: u64,
    cfg: TrainConfig,
    dropout_rng: ChaCha8Rng,
}

impl<S: Scalar> Trainer<S> {
    pub fn new(state: ModelState<S>, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let n = state.params.len();
        Ok(Trainer {
            state,
            m: alloc::vec![S::zero(); n],
            v: alloc::vec![S::zero(); n],
            step: 0,
            cfg: cfg.clone(),
            dropout_rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5851_f42d_4c95_7f2d),
        })
    }

    pub fn state(&self) -> &ModelState<S> {
        &self.state
    }

    pub fn into_state(self) -> ModelState<S> {
        self.state
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update on the summed LM and classification losses. The
    /// classification head is only updated when `cls` is non-empty and its
    /// loss weight is positive.
    pub fn mtl_step(&mut self, gen: &[TokenSequence], cls: &[ClsExample]) -> Result<Losses<S>> {
        let batch = self.step;
        let (losses, mut grads) = loss_and_grad(
            &self.state,
            gen,
            cls,
            S::of(self.cfg.lm_weight),
            S::of(self.cfg.cls_weight),
            Some(&mut self.dropout_rng),
        )?;
        if !(losses.total.is_finite() && losses.lm.is_finite() && losses.cls.is_finite()) {
            return Err(Error::NonFiniteLoss { batch });
        }

        let norm = grads.iter().map(|&g| g * g).sum::<S>().sqrt();
        let clip = S::of(self.cfg.clip_norm);
        if norm > clip {
            let scale = clip / norm;
            grads.iter_mut().for_each(|g| *g = *g * scale);
        }

        self.step += 1;
        let cfg = &self.cfg;
        let (b1, b2) = (S::of(cfg.beta1), S::of(cfg.beta2));
        let lr = S::of(cfg.learning_rate);
        let eps = S::of(cfg.epsilon);
        let bc1 = S::one() - b1.powi(self.step as i32);
        let bc2 = S::one() - b2.powi(self.step as i32);
        let cls_range = self.state.layout().cls_head();
        let cls_active = !cls.is_empty() && cfg.cls_weight > 0.0;
        for i in 0..grads.len() {
            if !cls_active && cls_range.contains(&i) {
                continue;
            }
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (S::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (S::one() - b2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            self.state.params[i] = self.state.params[i] - lr * mhat / (vhat.sqrt() + eps);
        }
        Ok(losses)
    }
}

/// Unified examples rendered into model inputs, grouped by dataset.
#[derive(Debug, Clone, Default)]
pub struct RenderedData {
    pub gen: BTreeMap<Dataset, Vec<TokenSequence>>,
    /// Statement keys parallel to `gen[Comve]`, used to pair ComVE batches.
    pub comve_gen_keys: Vec<String>,
    pub cls: BTreeMap<Dataset, Vec<ClsExample>>,
    pub comve_cls_by_key: BTreeMap<String, usize>,
}

pub fn render_examples(examples: &[UnifiedExample], vocab: &Vocab, max_len: usize) -> Result<RenderedData> {
    let mut out = RenderedData::default();
    for ex in examples {
        if let Some(target) = &ex.target {
            let seq = render_generation_sequence(vocab, &ex.keyword, &ex.source, target, max_len)?;
            out.gen.entry(ex.dataset).or_default().push(seq);
            if ex.dataset == Dataset::Comve {
                out.comve_gen_keys.push(statement_key(&ex.source));
            }
        }
        if let Some(label) = ex.merged_label {
            let seq = render_classification_sequence(vocab, &ex.keyword, &ex.source, &ex.choices, max_len)?;
            let list = out.cls.entry(ex.dataset).or_default();
            if ex.dataset == Dataset::Comve {
                out.comve_cls_by_key.insert(statement_key(&ex.source), list.len());
            }
            list.push(ClsExample {
                ids: seq.ids,
                dataset: ex.dataset,
                label,
            });
        }
    }
    Ok(out)
}

/// Endless reshuffled pass over `0..len`.
struct Pool {
    order: Vec<usize>,
    cursor: usize,
}

impl Pool {
    fn new(len: usize, rng: &mut ChaCha8Rng) -> Pool {
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(rng);
        Pool { order, cursor: 0 }
    }

    fn take(&mut self, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let n = n.min(self.order.len());
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if self.cursor == self.order.len() {
                self.order.shuffle(rng);
                self.cursor = 0;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

fn record<S: Scalar>(curve: &mut Vec<LossPoint>, step: u64, l: &Losses<S>) {
    curve.push(LossPoint {
        step,
        loss_lm: l.lm.as_f64(),
        loss_cls: l.cls.as_f64(),
        loss_total: l.total.as_f64(),
    });
}

fn should_log(step: u64, cfg: &TrainConfig) -> bool {
    step % cfg.eval_interval == 0 || step + 1 == cfg.max_steps
}

/// Language-model-only training on OMCS facts. The classification head is
/// left bit-identical.
pub fn pretrain_omcs<S: Scalar>(
    state: ModelState<S>,
    examples: &[UnifiedExample],
    vocab: &Vocab,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<S>> {
    state.check_vocab(vocab)?;
    let max_len = state.config.max_seq_len;
    let facts: Vec<TokenSequence> = examples
        .iter()
        .filter(|e| e.dataset == Dataset::Omcs)
        .filter_map(|e| e.target.as_ref().map(|t| (e, t)))
        .map(|(e, t)| render_generation_sequence(vocab, &e.keyword, &e.source, t, max_len))
        .collect::<Result<_>>()?;
    if facts.is_empty() {
        return Err(Error::EmptyInput("OMCS stream"));
    }
    let mut data_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pool = Pool::new(facts.len(), &mut data_rng);
    let mut trainer = Trainer::new(state, cfg)?;
    let mut curve = Vec::new();
    for step in 0..cfg.max_steps {
        let batch: Vec<TokenSequence> = pool
            .take(cfg.batch_size, &mut data_rng)
            .into_iter()
            .map(|i| facts[i].clone())
            .collect();
        let l = trainer.mtl_step(&batch, &[])?;
        if should_log(step, cfg) {
            record(&mut curve, step, &l);
        }
    }
    Ok(TrainOutcome {
        state: trainer.into_state(),
        curve,
    })
}

/// Multi-task fine-tuning over ComVE, CoS-E and OpenBook, minus `ablation`.
///
/// Steps cycle through the included datasets in the order ComVE, CoS-E,
/// OpenBook. A ComVE step pairs its generation batch with the Task B
/// records of the same false statements; other datasets draw their
/// classification batch independently. OMCS examples are ignored here.
pub fn train_union<S: Scalar>(
    state: ModelState<S>,
    examples: &[UnifiedExample],
    vocab: &Vocab,
    cfg: &TrainConfig,
    ablation: &BTreeSet<Dataset>,
) -> Result<TrainOutcome<S>> {
    if ablation.contains(&Dataset::Comve) {
        return Err(Error::MissingComve);
    }
    state.check_vocab(vocab)?;
    let kept: Vec<UnifiedExample> = examples
        .iter()
        .filter(|e| e.dataset != Dataset::Omcs && !ablation.contains(&e.dataset))
        .cloned()
        .collect();
    let data = render_examples(&kept, vocab, state.config.max_seq_len)?;
    if data.gen.get(&Dataset::Comve).map_or(true, Vec::is_empty) {
        return Err(Error::MissingComve);
    }

    let mut data_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let empty_gen = Vec::new();
    let empty_cls = Vec::new();
    let schedule: Vec<Dataset> = [Dataset::Comve, Dataset::Cose, Dataset::Openbook]
        .into_iter()
        .filter(|d| {
            let has_gen = data.gen.get(d).is_some_and(|v| !v.is_empty());
            let has_cls = cfg.classification && data.cls.get(d).is_some_and(|v| !v.is_empty());
            has_gen || has_cls
        })
        .collect();
    let mut gen_pools: BTreeMap<Dataset, Pool> = BTreeMap::new();
    let mut cls_pools: BTreeMap<Dataset, Pool> = BTreeMap::new();
    for &d in &schedule {
        gen_pools.insert(d, Pool::new(data.gen.get(&d).map_or(0, Vec::len), &mut data_rng));
        cls_pools.insert(d, Pool::new(data.cls.get(&d).map_or(0, Vec::len), &mut data_rng));
    }

    let mut trainer = Trainer::new(state, cfg)?;
    let mut curve = Vec::new();
    for step in 0..cfg.max_steps {
        let ds = schedule[(step % schedule.len() as u64) as usize];
        let gen_all = data.gen.get(&ds).unwrap_or(&empty_gen);
        let cls_all = data.cls.get(&ds).unwrap_or(&empty_cls);
        let picked = gen_pools.get_mut(&ds).unwrap().take(cfg.batch_size, &mut data_rng);
        let gen: Vec<TokenSequence> = picked.iter().map(|&i| gen_all[i].clone()).collect();
        let cls: Vec<ClsExample> = if !cfg.classification {
            Vec::new()
        } else if ds == Dataset::Comve {
            let mut seen = BTreeSet::new();
            picked
                .iter()
                .filter_map(|&i| data.comve_cls_by_key.get(&data.comve_gen_keys[i]))
                .filter(|&&j| seen.insert(j))
                .map(|&j| cls_all[j].clone())
                .collect()
        } else {
            cls_pools
                .get_mut(&ds)
                .unwrap()
                .take(cfg.batch_size, &mut data_rng)
                .into_iter()
                .map(|j| cls_all[j].clone())
                .collect()
        };
        if gen.is_empty() && cls.is_empty() {
            continue;
        }
        let l = trainer.mtl_step(&gen, &cls)?;
        if should_log(step, cfg) {
            record(&mut curve, step, &l);
        }
    }
    Ok(TrainOutcome {
        state: trainer.into_state(),
        curve,
    })
}
