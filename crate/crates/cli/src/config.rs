use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use union_core::corpus::{Dataset, KeywordTable};
use union_core::decode::DecodeConfig;
use union_core::metrics::EaConfig;
use union_core::model::{ModelConfig, TrainConfig};

use crate::ingest::ColumnMap;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub comve_c: Option<PathBuf>,
    pub comve_b: Option<PathBuf>,
    pub cose: Option<PathBuf>,
    pub openbook: Option<PathBuf>,
    pub omcs: Option<PathBuf>,
    /// Per-corpus renames, keyed by `comve_c`, `comve_b`, `cose` or
    /// `openbook`.
    pub column_map: BTreeMap<String, ColumnMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabSettings {
    pub max_size: usize,
    pub min_count: usize,
}

impl Default for VocabSettings {
    fn default() -> Self {
        VocabSettings {
            max_size: 8000,
            min_count: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenScorer {
    /// Kneser-Ney model fit on the OMCS facts.
    KnOmcs,
    /// LM head of the OMCS-pretrained transformer.
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSettings {
    pub kn_order: usize,
    pub kn_min_count: usize,
    pub ppl_gen: GenScorer,
    pub ea: EaConfig,
}

impl Default for MetricSettings {
    fn default() -> Self {
        MetricSettings {
            kn_order: 3,
            kn_min_count: 1,
            ppl_gen: GenScorer::KnOmcs,
            ea: EaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataPaths,
    pub keywords: KeywordTable,
    pub vocab: VocabSettings,
    pub model: ModelConfig,
    pub pretrain: TrainConfig,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
    pub metrics: MetricSettings,
    /// Datasets left out of `train` and `generate` runs.
    pub ablation: BTreeSet<Dataset>,
    /// Share of ComVE statements held out for evaluation, in percent.
    pub eval_percent: u64,
    pub out: PathBuf,
    /// Master seed; copied into every component config by [`Self::resolve`].
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataPaths::default(),
            keywords: KeywordTable::default(),
            vocab: VocabSettings::default(),
            model: ModelConfig::default(),
            pretrain: TrainConfig::default(),
            train: TrainConfig::default(),
            decode: DecodeConfig::default(),
            metrics: MetricSettings::default(),
            ablation: BTreeSet::new(),
            eval_percent: 10,
            out: PathBuf::from("runs/default"),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Reads a JSON config and applies `key.path=value` overrides. Relative
    /// data paths are taken relative to the config file.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => serde_json::to_value(ExperimentConfig::default())?,
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let mut cfg: ExperimentConfig = serde_json::from_value(value).context("invalid config")?;
        if let Some(base) = path.and_then(Path::parent) {
            for p in cfg.data.paths_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Propagates the master seed and checks every component config.
    pub fn resolve(mut self) -> Result<Self> {
        self.model.seed = self.seed;
        self.pretrain.seed = self.seed;
        self.train.seed = self.seed;
        self.decode.seed = self.seed;
        self.metrics.ea.seed = self.seed;
        self.keywords.validate()?;
        self.train.validate()?;
        self.pretrain.validate()?;
        self.decode.validate()?;
        if !(1..100).contains(&self.eval_percent) {
            bail!("eval_percent must lie in 1..=99");
        }
        if self.metrics.kn_order == 0 {
            bail!("metrics.kn_order must be at least 1");
        }
        if self.ablation.contains(&Dataset::Comve) {
            bail!("ComVE cannot be excluded");
        }
        Ok(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

impl DataPaths {
    fn paths_mut(&mut self) -> impl Iterator<Item = &mut PathBuf> {
        [&mut self.comve_c, &mut self.comve_b, &mut self.cose, &mut self.openbook, &mut self.omcs]
            .into_iter()
            .flatten()
    }

    pub fn column_map(&self, corpus: &str) -> Option<&ColumnMap> {
        self.column_map.get(corpus)
    }
}

/// Sets the value at a dotted key. The right-hand side is parsed as JSON
/// when possible and taken as a plain string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let Some((key, raw)) = assignment.split_once('=') else {
        bail!("override {assignment:?} is not of the form key=value");
    };
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.trim().split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            bail!("override key {key:?} has an empty segment");
        }
        let Value::Object(map) = node else {
            bail!("override key {key:?}: `{}` is not an object", parts[..i].join("."));
        };
        if i + 1 == parts.len() {
            map.insert((*part).to_string(), value);
            return Ok(());
        }
        node = map.entry(*part).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split always yields at least one segment")
}
