//! On-disk interchange formats: unified examples, vocabularies, references
//! and generations as JSON lines or JSON.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use union_core::corpus::{Dataset, KeywordTable, UnifiedExample};
use union_core::metrics::{MetricsReport, MetricsRow, SystemRow};
use union_core::tokenizer::{Vocab, NUM_SPECIALS};

pub const VOCAB_VERSION: u32 = 1;

/// One line of the unified stream. `targets` holds zero or more generation
/// targets for the same input; each expands to its own example on read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnifiedLine {
    pub dataset: Dataset,
    pub keyword: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<String>>,
    /// Merged 12-way label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<usize>,
}

impl From<&UnifiedExample> for UnifiedLine {
    fn from(e: &UnifiedExample) -> Self {
        UnifiedLine {
            dataset: e.dataset,
            keyword: e.keyword.clone(),
            source: e.source.clone(),
            targets: e.target.clone().map(|t| vec![t]),
            choices: (!e.choices.is_empty()).then(|| e.choices.clone()),
            gold: e.merged_label,
        }
    }
}

impl UnifiedLine {
    fn expand(self, keywords: &KeywordTable) -> Result<Vec<UnifiedExample>> {
        let has_cls = self.choices.is_some() || self.gold.is_some();
        let targets = self.targets.unwrap_or_default();
        if targets.is_empty() && !has_cls {
            bail!("example has neither targets nor choices");
        }
        if !targets.is_empty() && has_cls {
            bail!("example mixes targets with choices");
        }
        let base = UnifiedExample {
            dataset: self.dataset,
            keyword: self.keyword,
            source: self.source,
            target: None,
            choices: self.choices.unwrap_or_default(),
            merged_label: self.gold,
        };
        let out: Vec<UnifiedExample> = if targets.is_empty() {
            vec![base]
        } else {
            targets
                .into_iter()
                .map(|t| UnifiedExample {
                    target: Some(t),
                    ..base.clone()
                })
                .collect()
        };
        for e in &out {
            e.validate(keywords)?;
            if e.is_classification() && e.merged_label.is_none() {
                bail!("choices without a gold label");
            }
        }
        Ok(out)
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

pub fn write_unified(path: &Path, examples: &[UnifiedExample]) -> Result<()> {
    write_jsonl(path, examples.iter().map(UnifiedLine::from))
}

pub fn read_unified(path: &Path, keywords: &KeywordTable) -> Result<Vec<UnifiedExample>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let at = || format!("{}:{}", path.display(), i + 1);
        let parsed: UnifiedLine = serde_json::from_str(line).with_context(at)?;
        out.extend(parsed.expand(keywords).with_context(at)?);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabFile {
    version: u32,
    specials: Vec<String>,
    tokens: Vec<String>,
}

pub fn write_vocab(path: &Path, vocab: &Vocab) -> Result<()> {
    let file = VocabFile {
        version: VOCAB_VERSION,
        specials: vocab.specials().to_vec(),
        tokens: vocab.tokens()[NUM_SPECIALS..].to_vec(),
    };
    fs::write(path, serde_json::to_string_pretty(&file)? + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_vocab(path: &Path) -> Result<Vocab> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: VocabFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if file.version != VOCAB_VERSION {
        bail!("{}: unsupported vocabulary version {}", path.display(), file.version);
    }
    if file.specials.len() != NUM_SPECIALS {
        bail!("{}: expected {NUM_SPECIALS} special tokens", path.display());
    }
    let tokens = file.specials.into_iter().chain(file.tokens).collect();
    Vocab::from_tokens(tokens).with_context(|| format!("validating {}", path.display()))
}

/// A held-out ComVE statement with its reference explanations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceLine {
    pub id: String,
    pub source: String,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationLine {
    pub id: String,
    pub source: String,
    pub keyword: String,
    pub generation: String,
}

/// Reads a report written by [`MetricsReport::to_csv`]. Rows whose cells
/// read `ERR` come back as failed rows.
pub fn read_report_csv(path: &Path) -> Result<MetricsReport> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut report = MetricsReport::default();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        if rec.len() != 9 {
            bail!("{}: row {} has {} cells, expected 9", path.display(), i + 1, rec.len());
        }
        let system = rec[0].to_string();
        let metrics = if rec.iter().skip(1).any(|c| c == "ERR") {
            Err("failed".to_string())
        } else {
            let v: Vec<f64> = rec
                .iter()
                .skip(1)
                .map(str::parse)
                .collect::<Result<_, _>>()
                .with_context(|| format!("{}: row {}", path.display(), i + 1))?;
            Ok(MetricsRow {
                bleu: v[0],
                ppl_gen: v[1],
                ppl_trg: v[2],
                ea: v[3],
                uni_mean: v[4],
                uni_std: v[5],
                len_mean: v[6],
                len_std: v[7],
            })
        };
        report.rows.push(SystemRow { system, metrics });
    }
    Ok(report)
}
