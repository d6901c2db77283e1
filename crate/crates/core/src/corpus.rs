//! Dataset records, reformatting procedures and the unified keyword-tagged
//! example stream with its merged 12-way label space.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::text::statement_key;
use crate::{Error, Result};

/// Total width of the merged classification head.
pub const NUM_CLASSES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Comve,
    Cose,
    Openbook,
    Omcs,
}

impl Dataset {
    pub const ALL: [Dataset; 4] = [Dataset::Comve, Dataset::Cose, Dataset::Openbook, Dataset::Omcs];

    pub fn name(self) -> &'static str {
        match self {
            Dataset::Comve => "comve",
            Dataset::Cose => "cose",
            Dataset::Openbook => "openbook",
            Dataset::Omcs => "omcs",
        }
    }

    pub fn parse(s: &str) -> Option<Dataset> {
        Dataset::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(s.trim()))
    }

    /// Slice of the merged label space owned by this dataset. OMCS has none.
    pub fn label_slice(self) -> Option<LabelSlice> {
        let (offset, width) = match self {
            Dataset::Comve => (0, 3),
            Dataset::Openbook => (3, 4),
            Dataset::Cose => (7, 5),
            Dataset::Omcs => return None,
        };
        Some(LabelSlice {
            dataset: self,
            offset,
            width,
        })
    }

    /// Number of answer choices a classification record must carry.
    pub fn choice_arity(self) -> Option<usize> {
        self.label_slice().map(|s| s.width)
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Contiguous range `offset..offset + width` of the merged label space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelSlice {
    pub dataset: Dataset,
    pub offset: usize,
    pub width: usize,
}

impl LabelSlice {
    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.width
    }

    pub fn contains(&self, label: usize) -> bool {
        self.range().contains(&label)
    }
}

/// The three label slices in label order.
pub fn label_slices() -> [LabelSlice; 3] {
    [Dataset::Comve, Dataset::Openbook, Dataset::Cose].map(|d| d.label_slice().unwrap())
}

/// A Task C record: one false statement and its three reference reasons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplanationRecord {
    pub id: String,
    pub false_statement: String,
    pub references: [String; 3],
}

impl ExplanationRecord {
    pub fn new(id: impl Into<String>, false_statement: &str, references: &[&str]) -> Result<Self> {
        if references.len() != 3 {
            return Err(Error::Arity {
                what: "ComVE Task C references",
                expected: "3".to_string(),
                found: references.len(),
            });
        }
        let rec = ExplanationRecord {
            id: id.into(),
            false_statement: false_statement.trim().to_string(),
            references: [0, 1, 2].map(|i| references[i].trim().to_string()),
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.false_statement.is_empty() {
            return Err(Error::EmptyText("false statement"));
        }
        if self.references.iter().any(|r| r.is_empty()) {
            return Err(Error::EmptyText("reference"));
        }
        Ok(())
    }
}

/// A multiple-choice record (ComVE Task B, OpenBook or CoS-E).
///
/// `explanation` carries CoS-E's human explanation or OpenBook's supporting
/// fact; it becomes that dataset's generation target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceRecord {
    pub id: String,
    pub prompt: String,
    pub choices: Vec<String>,
    pub gold_index: usize,
    pub explanation: Option<String>,
}

impl ChoiceRecord {
    /// Checks the record against the choice arity of `dataset`.
    pub fn validate(&self, dataset: Dataset) -> Result<()> {
        let arity = dataset.choice_arity().ok_or(Error::NoLabelSlice(dataset))?;
        if self.choices.len() != arity {
            return Err(Error::Arity {
                what: "choices",
                expected: arity.to_string(),
                found: self.choices.len(),
            });
        }
        if self.prompt.is_empty() {
            return Err(Error::EmptyText("prompt"));
        }
        if self.choices.iter().any(|c| c.is_empty()) {
            return Err(Error::EmptyText("choice"));
        }
        if self.gold_index >= self.choices.len() {
            return Err(Error::GoldOutOfRange {
                index: self.gold_index,
                choices: self.choices.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryExample {
    pub prompt: String,
    pub candidate: String,
    pub label: bool,
}

/// One OMCS fact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactStatement {
    pub text: String,
}

impl FactStatement {
    pub fn new(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::EmptyText("fact"));
        }
        if text.contains('\n') {
            return Err(Error::InvalidConfig("fact contains a newline".into()));
        }
        Ok(FactStatement { text: text.into() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct UnifiedExample {
    pub dataset: Dataset,
    pub keyword: String,
    pub source: String,
    pub target: Option<String>,
    pub choices: Vec<String>,
    pub merged_label: Option<usize>,
}

impl UnifiedExample {
    pub fn is_generation(&self) -> bool {
        self.target.is_some()
    }

    pub fn is_classification(&self) -> bool {
        self.merged_label.is_some()
    }

    /// Checks keyword ownership and label-slice membership.
    pub fn validate(&self, keywords: &KeywordTable) -> Result<()> {
        if keywords.keyword(self.dataset) != self.keyword {
            return Err(Error::InvalidKeyword(self.keyword.clone()));
        }
        if let Some(label) = self.merged_label {
            let slice = self
                .dataset
                .label_slice()
                .ok_or(Error::NoLabelSlice(self.dataset))?;
            if !slice.contains(label) {
                return Err(Error::LabelOutOfSlice {
                    dataset: self.dataset,
                    label,
                });
            }
            if self.choices.len() != slice.width {
                return Err(Error::Arity {
                    what: "choices",
                    expected: slice.width.to_string(),
                    found: self.choices.len(),
                });
            }
        }
        Ok(())
    }
}

/// Contextual keyword surface form for each dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeywordTable {
    pub comve: String,
    pub cose: String,
    pub openbook: String,
    pub omcs: String,
}

impl Default for KeywordTable {
    fn default() -> Self {
        KeywordTable {
            comve: "<comve>".into(),
            cose: "<cose>".into(),
            openbook: "<openbook>".into(),
            omcs: "<omcs>".into(),
        }
    }
}

impl KeywordTable {
    pub fn keyword(&self, dataset: Dataset) -> &str {
        match dataset {
            Dataset::Comve => &self.comve,
            Dataset::Cose => &self.cose,
            Dataset::Openbook => &self.openbook,
            Dataset::Omcs => &self.omcs,
        }
    }

    pub fn dataset_of(&self, keyword: &str) -> Option<Dataset> {
        Dataset::ALL.into_iter().find(|&d| self.keyword(d) == keyword)
    }

    /// Keywords must be distinct and must not be producible by the word
    /// tokenizer, so each must contain a non-alphanumeric character and no
    /// whitespace.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for d in Dataset::ALL {
            let kw = self.keyword(d);
            if !seen.insert(kw) {
                return Err(Error::KeywordCollision(kw.into()));
            }
            let reachable = crate::text::word_tokens(kw).len() == 1 && crate::text::word_tokens(kw)[0] == kw;
            if kw.is_empty() || kw.chars().any(char::is_whitespace) || reachable {
                return Err(Error::InvalidKeyword(kw.into()));
            }
        }
        Ok(())
    }
}

/// Expands each Task C record into three (statement, reason) pairs,
/// record-major.
pub fn flatten_explanations(records: &[ExplanationRecord]) -> Vec<(String, String)> {
    records
        .iter()
        .flat_map(|r| {
            r.references
                .iter()
                .map(move |y| (r.false_statement.clone(), y.clone()))
        })
        .collect()
}

/// Expands each multiple-choice record into one binary example per choice;
/// only the gold choice is labelled true.
pub fn binarize_choices(records: &[ChoiceRecord]) -> Vec<BinaryExample> {
    records
        .iter()
        .flat_map(|r| {
            r.choices.iter().enumerate().map(move |(k, c)| BinaryExample {
                prompt: r.prompt.clone(),
                candidate: c.clone(),
                label: k == r.gold_index,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaskPairing {
    pub pairs: Vec<(ExplanationRecord, ChoiceRecord)>,
    pub unmatched_generation: Vec<ExplanationRecord>,
    pub unmatched_choice: Vec<ChoiceRecord>,
}

/// Joins Task C and Task B records on their normalized false statement.
/// Output pairs follow Task C order.
pub fn pair_tasks(gen: &[ExplanationRecord], cls: &[ChoiceRecord]) -> Result<TaskPairing> {
    let gen_keys: Vec<String> = gen.iter().map(|r| statement_key(&r.false_statement)).collect();
    let cls_keys: Vec<String> = cls.iter().map(|r| statement_key(&r.prompt)).collect();
    let mut dups = duplicates(&gen_keys);
    dups.extend(duplicates(&cls_keys));
    if !dups.is_empty() {
        dups.sort();
        dups.dedup();
        return Err(Error::DuplicateStatements(dups));
    }

    let index: BTreeMap<&str, usize> = cls_keys
        .iter()
        .enumerate()
        .map(|(i, k)| (k.as_str(), i))
        .collect();
    let mut used = alloc::vec![false; cls.len()];
    let mut out = TaskPairing::default();
    for (rec, key) in gen.iter().zip(&gen_keys) {
        match index.get(key.as_str()) {
            Some(&j) => {
                used[j] = true;
                out.pairs.push((rec.clone(), cls[j].clone()));
            }
            None => out.unmatched_generation.push(rec.clone()),
        }
    }
    out.unmatched_choice = cls
        .iter()
        .zip(&used)
        .filter(|(_, &u)| !u)
        .map(|(r, _)| r.clone())
        .collect();
    Ok(out)
}

fn duplicates(keys: &[String]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    keys.iter()
        .filter(|k| !seen.insert(k.as_str()))
        .cloned()
        .collect()
}

/// Raw inputs for [`unify`]. Any of them may be empty.
#[derive(Debug, Clone, Default)]
pub struct CorpusSources {
    pub comve_c: Vec<ExplanationRecord>,
    pub comve_b: Vec<ChoiceRecord>,
    pub cose: Vec<ChoiceRecord>,
    pub openbook: Vec<ChoiceRecord>,
    pub omcs: Vec<FactStatement>,
}

/// Builds the keyword-tagged example stream.
///
/// Order: ComVE generation (flattened), ComVE classification, CoS-E
/// generation then classification, OpenBook generation then
/// classification, OMCS facts. Within a block, input order is kept.
pub fn unify(sources: &CorpusSources, keywords: &KeywordTable) -> Result<Vec<UnifiedExample>> {
    keywords.validate()?;
    let mut out = Vec::new();

    let kw = |d: Dataset| String::from(keywords.keyword(d));
    for rec in &sources.comve_c {
        rec.validate()?;
    }
    for (x, y) in flatten_explanations(&sources.comve_c) {
        out.push(UnifiedExample {
            dataset: Dataset::Comve,
            keyword: kw(Dataset::Comve),
            source: x,
            target: Some(y),
            choices: Vec::new(),
            merged_label: None,
        });
    }
    push_choices(&mut out, Dataset::Comve, &sources.comve_b, keywords, false)?;
    push_choices(&mut out, Dataset::Cose, &sources.cose, keywords, true)?;
    push_choices(&mut out, Dataset::Openbook, &sources.openbook, keywords, true)?;
    for fact in &sources.omcs {
        let fact = FactStatement::new(&fact.text)?;
        out.push(UnifiedExample {
            dataset: Dataset::Omcs,
            keyword: kw(Dataset::Omcs),
            source: String::new(),
            target: Some(fact.text),
            choices: Vec::new(),
            merged_label: None,
        });
    }
    Ok(out)
}

fn push_choices(
    out: &mut Vec<UnifiedExample>,
    dataset: Dataset,
    records: &[ChoiceRecord],
    keywords: &KeywordTable,
    with_generation: bool,
) -> Result<()> {
    let slice = dataset.label_slice().ok_or(Error::NoLabelSlice(dataset))?;
    let keyword = String::from(keywords.keyword(dataset));
    for rec in records {
        rec.validate(dataset)?;
    }
    if with_generation {
        for rec in records {
            if let Some(expl) = rec.explanation.as_deref().filter(|e| !e.trim().is_empty()) {
                out.push(UnifiedExample {
                    dataset,
                    keyword: keyword.clone(),
                    source: rec.prompt.clone(),
                    target: Some(expl.trim().into()),
                    choices: Vec::new(),
                    merged_label: None,
                });
            }
        }
    }
    for rec in records {
        let label = rec.gold_index + slice.offset;
        if !slice.contains(label) {
            return Err(Error::LabelOutOfSlice { dataset, label });
        }
        out.push(UnifiedExample {
            dataset,
            keyword: keyword.clone(),
            source: rec.prompt.clone(),
            target: None,
            choices: rec.choices.clone(),
            merged_label: Some(label),
        });
    }
    Ok(())
}

/// Per-dataset counts of generation and classification examples.
pub fn count_examples(examples: &[UnifiedExample]) -> BTreeMap<Dataset, (usize, usize)> {
    let mut counts = BTreeMap::new();
    for ex in examples {
        let entry = counts.entry(ex.dataset).or_insert((0, 0));
        if ex.is_generation() {
            entry.0 += 1;
        }
        if ex.is_classification() {
            entry.1 += 1;
        }
    }
    counts
}

/// Converts a letter (`A`..) or a 0-based integer into a choice index.
pub fn parse_gold_label(raw: &str, choices: usize) -> Result<usize> {
    let raw = raw.trim();
    let idx = if let Ok(n) = raw.parse::<usize>() {
        n
    } else {
        let mut chars = raw.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if c.is_ascii_alphabetic() => {
                (c.to_ascii_uppercase() as u8 - b'A') as usize
            }
            _ => {
                return Err(Error::InvalidConfig(format!("unrecognized gold label {raw:?}")));
            }
        }
    };
    if idx >= choices {
        return Err(Error::GoldOutOfRange {
            index: idx,
            choices,
        });
    }
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn choice(prompt: &str, n: usize, gold: usize) -> ChoiceRecord {
        ChoiceRecord {
            id: prompt.into(),
            prompt: prompt.into(),
            choices: (0..n).map(|k| format!("option {k}")).collect(),
            gold_index: gold,
            explanation: Some(format!("because of {prompt}")),
        }
    }

    fn expl(stmt: &str) -> ExplanationRecord {
        ExplanationRecord::new(stmt, stmt, &["r one", "r two", "r three"]).unwrap()
    }

    #[test]
    fn slices_partition_twelve_labels() {
        let mut covered = [0u8; NUM_CLASSES];
        for s in label_slices() {
            for l in s.range() {
                covered[l] += 1;
            }
        }
        assert!(covered.iter().all(|&c| c == 1));
        let widths: Vec<usize> = label_slices().iter().map(|s| s.width).collect();
        assert_eq!(widths, [3, 4, 5]);
        assert_eq!(Dataset::Cose.label_slice().unwrap().offset, 7);
    }

    #[test]
    fn explanation_record_needs_three_references() {
        let err = ExplanationRecord::new("1", "x", &["a", "b"]).unwrap_err();
        assert!(matches!(err, Error::Arity { found: 2, .. }));
        assert!(ExplanationRecord::new("1", "x", &["a", " ", "c"]).is_err());
    }

    #[test]
    fn book_statement_flattens_to_three_pairs() {
        let rec = ExplanationRecord::new(
            "t1",
            "We use book to know the time",
            &[
                "A book is used to study",
                "A book does not have the ability to show what time it is.",
                "Books don't tell the time",
            ],
        )
        .unwrap();
        let pairs = flatten_explanations(&[rec.clone()]);
        assert_eq!(pairs.len(), 3);
        for (j, (x, y)) in pairs.iter().enumerate() {
            assert_eq!(x, &rec.false_statement);
            assert_eq!(y, &rec.references[j]);
        }
        assert!(flatten_explanations(&[]).is_empty());
    }

    #[test]
    fn flatten_targets_belong_to_their_record() {
        let recs: Vec<_> = (0..10)
            .map(|i| {
                let refs = [format!("a{i}"), format!("b{i}"), format!("c{i}")];
                ExplanationRecord::new(
                    format!("{i}"),
                    &format!("stmt {i}"),
                    &[&refs[0], &refs[1], &refs[2]],
                )
                .unwrap()
            })
            .collect();
        let pairs = flatten_explanations(&recs);
        assert_eq!(pairs.len(), 30);
        for (x, y) in &pairs {
            let owner = recs.iter().find(|r| &r.false_statement == x).unwrap();
            assert!(owner.references.iter().any(|r| r == y));
        }
    }

    #[test]
    fn binarize_counts_and_positives() {
        let one = binarize_choices(&[choice("s", 3, 0)]);
        assert_eq!(one.len(), 3);
        assert!(one[0].label);
        assert_eq!(one.iter().filter(|b| b.label).count(), 1);

        let mut mixed: Vec<_> = (0..4).map(|i| choice(&format!("ob{i}"), 4, i % 4)).collect();
        mixed.extend((0..2).map(|i| choice(&format!("cs{i}"), 5, 4 - i)));
        let out = binarize_choices(&mixed);
        assert_eq!(out.len(), 26);
        assert_eq!(out.iter().filter(|b| b.label).count(), 6);
    }

    #[test]
    fn pairing_matches_on_normalized_statement() {
        let p = pair_tasks(&[expl("The chocolate cried.")], &[choice("the chocolate  cried", 3, 1)]).unwrap();
        assert_eq!(p.pairs.len(), 1);
        assert!(p.unmatched_generation.is_empty() && p.unmatched_choice.is_empty());

        let p = pair_tasks(&[expl("Cars fly")], &[]).unwrap();
        assert!(p.pairs.is_empty());
        assert_eq!(p.unmatched_generation.len(), 1);
    }

    #[test]
    fn pairing_rejects_duplicates() {
        let err = pair_tasks(&[expl("A b."), expl("a b")], &[]).unwrap_err();
        assert_eq!(err, Error::DuplicateStatements(vec!["a b".into()]));
    }

    #[test]
    fn unify_assigns_merged_labels() {
        let sources = CorpusSources {
            comve_c: vec![expl("He put an elephant in the fridge")],
            comve_b: vec![choice("He put an elephant in the fridge", 3, 1)],
            cose: vec![choice("where is a shelf?", 5, 0)],
            openbook: vec![choice("what melts ice?", 4, 2)],
            omcs: vec![FactStatement::new("You are likely to find a shelf in a cupboard.").unwrap()],
        };
        let out = unify(&sources, &KeywordTable::default()).unwrap();
        let labels: Vec<(Dataset, usize)> = out
            .iter()
            .filter_map(|e| e.merged_label.map(|l| (e.dataset, l)))
            .collect();
        assert_eq!(
            labels,
            [(Dataset::Comve, 1), (Dataset::Cose, 7), (Dataset::Openbook, 5)]
        );
        let fact = out.last().unwrap();
        assert_eq!(fact.dataset, Dataset::Omcs);
        assert_eq!(fact.keyword, "<omcs>");
        assert_eq!(fact.source, "");
        assert_eq!(fact.target.as_deref(), Some("You are likely to find a shelf in a cupboard."));
        assert!(fact.merged_label.is_none() && fact.choices.is_empty());
        // 3 comve gen + 1 comve cls + 2 cose + 2 openbook + 1 omcs
        assert_eq!(out.len(), 9);
        for ex in &out {
            ex.validate(&KeywordTable::default()).unwrap();
        }
    }

    #[test]
    fn unify_rejects_keyword_collision() {
        let mut table = KeywordTable::default();
        table.cose = table.comve.clone();
        assert!(matches!(
            unify(&CorpusSources::default(), &table),
            Err(Error::KeywordCollision(_))
        ));
        table.cose = "plainword".into();
        assert!(matches!(
            unify(&CorpusSources::default(), &table),
            Err(Error::InvalidKeyword(_))
        ));
    }

    #[test]
    fn unify_rejects_wrong_arity() {
        let sources = CorpusSources {
            openbook: vec![choice("q", 5, 0)],
            ..Default::default()
        };
        assert!(matches!(
            unify(&sources, &KeywordTable::default()),
            Err(Error::Arity { .. })
        ));
    }

    #[test]
    fn gold_letters_round_trip() {
        for (i, letter) in ["A", "B", "C", "D"].iter().enumerate() {
            assert_eq!(parse_gold_label(letter, 4).unwrap(), i);
            let back = (b'A' + i as u8) as char;
            assert_eq!(back.to_string(), *letter);
        }
        assert_eq!(parse_gold_label("c", 4).unwrap(), 2);
        assert_eq!(parse_gold_label("2", 3).unwrap(), 2);
        assert!(parse_gold_label("E", 4).is_err());
        assert!(parse_gold_label("AB", 4).is_err());
    }
}
