//! Experiment stages. Each stage reads and writes plain files under the
//! output directory so that any stage can be rerun on its own.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use union_core::corpus::{unify, ChoiceRecord, CorpusSources, Dataset, ExplanationRecord, UnifiedExample};
use union_core::decode::batch_generate;
use union_core::metrics::{
    evaluate_all, fit_ea, fit_ngram_lm, EaClassifier, LanguageModel, MetricsReport, MetricsRow, ModelScorer, NGramLM,
    SystemRow,
};
use union_core::model::{init_model_for, pretrain_omcs, train_union, LossPoint, ModelState};
use union_core::stable_hash;
use union_core::text::statement_key;
use union_core::tokenizer::{build_vocab_with_keywords, Vocab};

use crate::checkpoint;
use crate::config::{ExperimentConfig, GenScorer};
use crate::formats::{read_jsonl, read_unified, read_vocab, write_jsonl, write_unified, write_vocab, GenerationLine, ReferenceLine};
use crate::ingest;

pub const TRAIN_FILE: &str = "train.jsonl";
pub const REFERENCES_FILE: &str = "references.jsonl";
pub const VOCAB_FILE: &str = "vocab.json";
pub const PRETRAINED_FILE: &str = "pretrained.ckpt";
pub const MODEL_FILE: &str = "model.ckpt";
pub const GENERATIONS_FILE: &str = "generations.jsonl";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";
pub const CONFIG_SNAPSHOT: &str = "config.json";

pub fn data_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.join("data")
}

/// True when a ComVE statement belongs to the held-out evaluation split.
pub fn is_eval_statement(statement: &str, percent: u64) -> bool {
    stable_hash(statement_key(statement).as_bytes()) % 100 < percent
}

/// Example counts per dataset: (generation, classification).
pub type Counts = BTreeMap<Dataset, (usize, usize)>;

pub fn count(examples: &[UnifiedExample]) -> Counts {
    let mut out = Counts::new();
    for e in examples {
        let c = out.entry(e.dataset).or_default();
        if e.is_generation() {
            c.0 += 1;
        } else {
            c.1 += 1;
        }
    }
    out
}

fn required<'a>(path: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    path.as_deref()
        .with_context(|| format!("no path configured for data.{name} (exclude the dataset to skip it)"))
}

fn snapshot(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join(CONFIG_SNAPSHOT), cfg.to_json()?).context("writing config snapshot")
}

/// Ingests the raw corpora, holds out ComVE statements for evaluation and
/// writes the unified training stream, the evaluation references and the
/// vocabulary. Datasets in `exclude` are not read.
pub fn prepare(cfg: &ExperimentConfig, exclude: &BTreeSet<Dataset>) -> Result<Counts> {
    let map = |name: &str| cfg.data.column_map(name);
    let comve_c = ingest::load_comve_c(required(&cfg.data.comve_c, "comve_c")?, map("comve_c"))?;
    let comve_b = ingest::load_comve_b(required(&cfg.data.comve_b, "comve_b")?, map("comve_b"))?;
    let choice = |d: Dataset, path: &Option<PathBuf>| -> Result<Vec<ChoiceRecord>> {
        if exclude.contains(&d) {
            return Ok(Vec::new());
        }
        Ok(ingest::load_choice_jsonl(required(path, d.name())?, d, map(d.name()))?)
    };
    let cose = choice(Dataset::Cose, &cfg.data.cose)?;
    let openbook = choice(Dataset::Openbook, &cfg.data.openbook)?;
    let omcs = if exclude.contains(&Dataset::Omcs) {
        Vec::new()
    } else {
        ingest::load_omcs(required(&cfg.data.omcs, "omcs")?)?
    };

    let held_out = |s: &str| is_eval_statement(s, cfg.eval_percent);
    let (eval_c, train_c): (Vec<ExplanationRecord>, Vec<ExplanationRecord>) =
        comve_c.into_iter().partition(|r| held_out(&r.false_statement));
    let train_b: Vec<ChoiceRecord> = comve_b.into_iter().filter(|r| !held_out(&r.prompt)).collect();
    if eval_c.is_empty() || train_c.is_empty() {
        bail!(
            "ComVE Task C split is degenerate: {} training and {} evaluation statements",
            train_c.len(),
            eval_c.len()
        );
    }
    let references: Vec<ReferenceLine> = eval_c
        .iter()
        .map(|r| ReferenceLine {
            id: r.id.clone(),
            source: r.false_statement.clone(),
            references: r.references.to_vec(),
        })
        .collect();
    let sources = CorpusSources {
        comve_c: train_c,
        comve_b: train_b,
        cose,
        openbook,
        omcs,
    };
    let train = unify(&sources, &cfg.keywords)?;
    let texts = train
        .iter()
        .flat_map(|e| std::iter::once(&e.source).chain(&e.target).chain(&e.choices))
        .map(String::as_str);
    let vocab = build_vocab_with_keywords(texts, cfg.vocab.max_size, cfg.vocab.min_count, &cfg.keywords)?;

    let dir = data_dir(cfg);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_unified(&dir.join(TRAIN_FILE), &train)?;
    write_jsonl(&dir.join(REFERENCES_FILE), &references)?;
    write_vocab(&dir.join(VOCAB_FILE), &vocab)?;
    let counts = count(&train);
    for (d, (g, c)) in &counts {
        info!("prepared {d}: {g} generation, {c} classification examples");
    }
    info!("held out {} ComVE statements; vocabulary of {}", references.len(), vocab.len());
    Ok(counts)
}

/// Everything `prepare` wrote.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Vec<UnifiedExample>,
    pub references: Vec<ReferenceLine>,
    pub vocab: Vocab,
}

impl Prepared {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let dir = data_dir(cfg);
        if !dir.join(TRAIN_FILE).exists() {
            bail!("{} has no prepared data; run `prepare` first", dir.display());
        }
        let vocab = read_vocab(&dir.join(VOCAB_FILE))?;
        if vocab.keyword_table() != cfg.keywords {
            bail!("prepared vocabulary uses different keywords than the config");
        }
        Ok(Prepared {
            train: read_unified(&dir.join(TRAIN_FILE), &cfg.keywords)?,
            references: read_jsonl(&dir.join(REFERENCES_FILE))?,
            vocab,
        })
    }
}

fn write_curve(path: &Path, curve: &[LossPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["step", "loss_lm", "loss_cls", "loss_total"])?;
    for p in curve {
        w.write_record([p.step.to_string(), p.loss_lm.to_string(), p.loss_cls.to_string(), p.loss_total.to_string()])?;
        info!("step {:>6}  lm {:.4}  cls {:.4}  total {:.4}", p.step, p.loss_lm, p.loss_cls, p.loss_total);
    }
    w.flush()?;
    Ok(())
}

/// LM-only pretraining on the OMCS facts, written to `dir`.
pub fn pretrain(cfg: &ExperimentConfig, data: &Prepared, dir: &Path) -> Result<ModelState<f32>> {
    snapshot(cfg, dir)?;
    let state = init_model_for::<f32>(&cfg.model, &data.vocab)?;
    info!("pretraining {} parameters on OMCS", state.num_params());
    let out = pretrain_omcs(state, &data.train, &data.vocab, &cfg.pretrain).context("pretrain")?;
    write_curve(&dir.join("pretrain_curve.csv"), &out.curve)?;
    checkpoint::save(&out.state, &dir.join(PRETRAINED_FILE))?;
    Ok(out.state)
}

/// Multi-task training excluding `ablation`, starting from `init` or from
/// a fresh initialization.
pub fn train(
    cfg: &ExperimentConfig,
    data: &Prepared,
    init: Option<ModelState<f32>>,
    dir: &Path,
) -> Result<ModelState<f32>> {
    snapshot(cfg, dir)?;
    let state = match init {
        Some(s) => s,
        None => init_model_for::<f32>(&cfg.model, &data.vocab)?,
    };
    let ablation: BTreeSet<Dataset> = cfg.ablation.iter().copied().filter(|d| *d != Dataset::Omcs).collect();
    let included = Dataset::ALL.iter().filter(|d| !cfg.ablation.contains(d)).count();
    info!(
        "training on {included} datasets (classification {})",
        if cfg.train.classification { "on" } else { "off" }
    );
    let out = train_union(state, &data.train, &data.vocab, &cfg.train, &ablation).context("train")?;
    write_curve(&dir.join("train_curve.csv"), &out.curve)?;
    checkpoint::save(&out.state, &dir.join(MODEL_FILE))?;
    Ok(out.state)
}

/// Explains every held-out statement under the ComVE keyword.
pub fn generate(cfg: &ExperimentConfig, data: &Prepared, state: &ModelState<f32>, dir: &Path) -> Result<Vec<GenerationLine>> {
    let keyword = cfg.keywords.comve.as_str();
    let sources: Vec<String> = data.references.iter().map(|r| r.source.clone()).collect();
    let outputs = batch_generate(state, &data.vocab, keyword, &sources, &cfg.decode).context("generate")?;
    let lines: Vec<GenerationLine> = data
        .references
        .iter()
        .zip(outputs)
        .map(|(r, generation)| GenerationLine {
            id: r.id.clone(),
            source: r.source.clone(),
            keyword: keyword.to_string(),
            generation,
        })
        .collect();
    fs::create_dir_all(dir)?;
    write_jsonl(&dir.join(GENERATIONS_FILE), &lines)?;
    Ok(lines)
}

enum GenLm {
    Kn(NGramLM),
    Model { state: ModelState<f32>, vocab: Vocab, keyword: String },
}

/// Metric models shared by every system under comparison.
pub struct Evaluator {
    trg_lm: NGramLM,
    gen_lm: GenLm,
    ea: EaClassifier,
}

impl Evaluator {
    /// Fits the target-corpus n-gram model and the EA discriminator on the
    /// ComVE training split, plus the general-text scorer. `pretrained` is
    /// required when the general scorer is the pretrained model.
    pub fn fit(cfg: &ExperimentConfig, data: &Prepared, pretrained: Option<&ModelState<f32>>) -> Result<Self> {
        let m = &cfg.metrics;
        let comve: Vec<&UnifiedExample> = data.train.iter().filter(|e| e.dataset == Dataset::Comve).collect();
        let mut trg_corpus: Vec<&str> = Vec::new();
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for e in &comve {
            if let Some(t) = &e.target {
                trg_corpus.push(t);
                positives.push((e.source.clone(), t.clone()));
            }
            if let Some(gold) = e.merged_label {
                for (i, c) in e.choices.iter().enumerate() {
                    trg_corpus.push(c);
                    let pair = (e.source.clone(), c.clone());
                    if i == gold {
                        positives.push(pair);
                    } else {
                        negatives.push(pair);
                    }
                }
            }
        }
        let trg_lm = fit_ngram_lm(&trg_corpus, m.kn_order, m.kn_min_count).context("fitting the target n-gram model")?;
        let ea = fit_ea(&positives, &negatives, &m.ea).context("fitting EA")?;
        let gen_lm = match m.ppl_gen {
            GenScorer::KnOmcs => {
                let facts: Vec<&str> = data
                    .train
                    .iter()
                    .filter(|e| e.dataset == Dataset::Omcs)
                    .filter_map(|e| e.target.as_deref())
                    .collect();
                GenLm::Kn(fit_ngram_lm(&facts, m.kn_order, m.kn_min_count).context("fitting the OMCS n-gram model")?)
            }
            GenScorer::Model => GenLm::Model {
                state: pretrained.context("the model scorer needs a pretrained checkpoint")?.clone(),
                vocab: data.vocab.clone(),
                keyword: cfg.keywords.omcs.clone(),
            },
        };
        for w in trg_lm.warnings() {
            log::warn!("target n-gram model: {w}");
        }
        Ok(Evaluator { trg_lm, gen_lm, ea })
    }

    pub fn evaluate(&self, data: &Prepared, gens: &[GenerationLine]) -> Result<MetricsRow> {
        let by_id: BTreeMap<&str, &ReferenceLine> = data.references.iter().map(|r| (r.id.as_str(), r)).collect();
        let mut refs = Vec::with_capacity(gens.len());
        for g in gens {
            let r = by_id.get(g.id.as_str()).with_context(|| format!("no references for {}", g.id))?;
            refs.push(r.references.clone());
        }
        let texts: Vec<&str> = gens.iter().map(|g| g.generation.as_str()).collect();
        let sources: Vec<&str> = gens.iter().map(|g| g.source.as_str()).collect();
        let scorer;
        let gen_lm: &dyn LanguageModel = match &self.gen_lm {
            GenLm::Kn(lm) => lm,
            GenLm::Model { state, vocab, keyword } => {
                scorer = ModelScorer { state, vocab, keyword };
                &scorer
            }
        };
        Ok(evaluate_all(&texts, &sources, &refs, &self.trg_lm, gen_lm, &self.ea)?)
    }
}

pub fn write_report(report: &MetricsReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(REPORT_CSV), report.to_csv())?;
    fs::write(dir.join(REPORT_TXT), report.to_table())?;
    Ok(())
}

/// One row of the ablation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    pub slug: &'static str,
    pub ablation: BTreeSet<Dataset>,
    pub classification: bool,
}

pub fn conditions() -> Vec<Condition> {
    use Dataset::*;
    let row = |name, slug, ablation: &[Dataset], classification| Condition {
        name,
        slug,
        ablation: ablation.iter().copied().collect(),
        classification,
    };
    vec![
        row("Baseline", "baseline", &[Cose, Openbook, Omcs], false),
        row("Baseline + MTL", "baseline-mtl", &[Cose, Openbook, Omcs], true),
        row("UNION w/o CoSE", "union-wo-cose", &[Cose], true),
        row("UNION w/o OpenBook", "union-wo-openbook", &[Openbook], true),
        row("UNION w/o OMCS", "union-wo-omcs", &[Omcs], true),
        row("UNION", "union", &[], true),
    ]
}

/// Trains, generates and evaluates one condition inside `dir`.
pub fn run_condition(
    cfg: &ExperimentConfig,
    data: &Prepared,
    pretrained: Option<&ModelState<f32>>,
    evaluator: &Evaluator,
    dir: &Path,
) -> Result<MetricsRow> {
    let init = if cfg.ablation.contains(&Dataset::Omcs) {
        None
    } else {
        Some(pretrained.context("OMCS pretraining is part of this condition but no pretrained model exists")?.clone())
    };
    let state = train(cfg, data, init, dir)?;
    let gens = generate(cfg, data, &state, dir)?;
    evaluator.evaluate(data, &gens).context("evaluate")
}

/// Prepares the data, pretrains once and runs all six conditions with the
/// shared seed and split. A failed condition is recorded in its row.
pub fn ablate(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    snapshot(cfg, &cfg.out)?;
    prepare(cfg, &BTreeSet::new()).context("prepare")?;
    let data = Prepared::load(cfg)?;
    let pretrained = pretrain(cfg, &data, &cfg.out).context("pretrain")?;
    let evaluator = Evaluator::fit(cfg, &data, Some(&pretrained))?;
    let mut report = MetricsReport::default();
    for cond in conditions() {
        let mut c = cfg.clone();
        c.ablation = cond.ablation.clone();
        c.train.classification = cond.classification;
        info!(
            "condition {}: {} datasets included",
            cond.name,
            Dataset::ALL.len() - cond.ablation.len()
        );
        let outcome = run_condition(&c, &data, Some(&pretrained), &evaluator, &cfg.out.join(cond.slug));
        if let Err(e) = &outcome {
            log::error!("condition {} failed: {e:#}", cond.name);
        }
        report.rows.push(SystemRow {
            system: cond.name.to_string(),
            metrics: outcome.map_err(|e| format!("{e:#}")),
        });
    }
    write_report(&report, &cfg.out)?;
    Ok(report)
}
