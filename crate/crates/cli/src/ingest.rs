//! Raw corpus loaders. Every loader trims texts, preserves row order and
//! cites the 1-based line number of a bad row.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde_json::Value;
use union_core::corpus::{parse_gold_label, ChoiceRecord, Dataset, ExplanationRecord, FactStatement};

/// Maps a canonical column or field name to the name used in a file.
pub type ColumnMap = BTreeMap<String, String>;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: field `{field}`: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        field: String,
        message: String,
    },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
}

fn column<'a>(map: Option<&'a ColumnMap>, canonical: &'a str) -> &'a str {
    map.and_then(|m| m.get(canonical)).map_or(canonical, String::as_str)
}

struct Csv {
    path: PathBuf,
    reader: csv::Reader<File>,
    headers: csv::StringRecord,
}

impl Csv {
    fn open(path: &Path) -> Result<Self, IngestError> {
        let io = |source| IngestError::Io { path: path.into(), source };
        let file = File::open(path).map_err(io)?;
        if file.metadata().map_err(io)?.len() == 0 {
            return Ok(Csv {
                path: path.into(),
                reader: csv::ReaderBuilder::new().has_headers(false).from_reader(file),
                headers: csv::StringRecord::new(),
            });
        }
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
        let headers = reader.headers().map_err(|e| row_error(path, &e, "header"))?.clone();
        Ok(Csv { path: path.into(), reader, headers })
    }

    fn index(&self, name: &str) -> Result<usize, IngestError> {
        self.headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::MissingColumn {
                path: self.path.clone(),
                column: name.into(),
            })
    }

    fn rows(&mut self, columns: &[&str]) -> Result<Vec<(u64, Vec<String>)>, IngestError> {
        if self.headers.is_empty() {
            return Ok(Vec::new());
        }
        let idx: Vec<usize> = columns.iter().map(|c| self.index(c)).collect::<Result<_, _>>()?;
        let mut out = Vec::new();
        for rec in self.reader.records() {
            let rec = rec.map_err(|e| row_error(&self.path, &e, "row"))?;
            let line = rec.position().map_or(0, |p| p.line());
            let mut cells = Vec::with_capacity(idx.len());
            for (&i, name) in idx.iter().zip(columns) {
                let cell = rec.get(i).ok_or_else(|| IngestError::Row {
                    path: self.path.clone(),
                    line,
                    field: (*name).into(),
                    message: "missing value".into(),
                })?;
                cells.push(cell.trim().to_string());
            }
            out.push((line, cells));
        }
        Ok(out)
    }
}

fn row_error(path: &Path, e: &csv::Error, field: &str) -> IngestError {
    IngestError::Row {
        path: path.into(),
        line: e.position().map_or(0, |p| p.line()),
        field: field.into(),
        message: e.to_string(),
    }
}

fn core_error(path: &Path, line: u64, field: &str, e: union_core::Error) -> IngestError {
    IngestError::Row {
        path: path.into(),
        line,
        field: field.into(),
        message: e.to_string(),
    }
}

/// ComVE Task C: `FalseSent, Reason1, Reason2, Reason3`.
pub fn load_comve_c(path: &Path, map: Option<&ColumnMap>) -> Result<Vec<ExplanationRecord>, IngestError> {
    let names = ["FalseSent", "Reason1", "Reason2", "Reason3"].map(|c| column(map, c));
    let mut csv = Csv::open(path)?;
    csv.rows(&names)?
        .into_iter()
        .enumerate()
        .map(|(i, (line, cells))| {
            let refs: Vec<&str> = cells[1..].iter().map(String::as_str).collect();
            ExplanationRecord::new(format!("comve-c-{i}"), &cells[0], &refs)
                .map_err(|e| core_error(path, line, names[0], e))
        })
        .collect()
}

/// ComVE Task B: `FalseSent, OptionA, OptionB, OptionC, GoldLabel` with
/// gold as a letter or a 0-based index.
pub fn load_comve_b(path: &Path, map: Option<&ColumnMap>) -> Result<Vec<ChoiceRecord>, IngestError> {
    let names = ["FalseSent", "OptionA", "OptionB", "OptionC", "GoldLabel"].map(|c| column(map, c));
    let mut csv = Csv::open(path)?;
    csv.rows(&names)?
        .into_iter()
        .enumerate()
        .map(|(i, (line, cells))| {
            let gold = parse_gold_label(&cells[4], 3).map_err(|e| core_error(path, line, names[4], e))?;
            let rec = ChoiceRecord {
                id: format!("comve-b-{i}"),
                prompt: cells[0].clone(),
                choices: cells[1..4].to_vec(),
                gold_index: gold,
                explanation: None,
            };
            rec.validate(Dataset::Comve).map_err(|e| core_error(path, line, names[0], e))?;
            Ok(rec)
        })
        .collect()
}

fn text_field(obj: &Value, name: &str) -> Option<String> {
    obj.get(name).and_then(Value::as_str).map(|s| s.trim().to_string())
}

/// CoS-E or OpenBook JSON lines: `question`, `choices` (array), `answer`
/// (letter, index or choice text) and an optional `explanation` or `fact`.
pub fn load_choice_jsonl(
    path: &Path,
    dataset: Dataset,
    map: Option<&ColumnMap>,
) -> Result<Vec<ChoiceRecord>, IngestError> {
    let f_question = column(map, "question");
    let f_choices = column(map, "choices");
    let f_answer = column(map, "answer");
    let f_explanations = [column(map, "explanation"), column(map, "fact")];
    let mut out = Vec::new();
    for (line, text) in lines(path)? {
        let bad = |field: &str, message: String| IngestError::Row {
            path: path.into(),
            line,
            field: field.into(),
            message,
        };
        let obj: Value = serde_json::from_str(&text).map_err(|e| bad("line", e.to_string()))?;
        let question = text_field(&obj, f_question).ok_or_else(|| bad(f_question, "expected a string".into()))?;
        let choices: Vec<String> = obj
            .get(f_choices)
            .and_then(Value::as_array)
            .ok_or_else(|| bad(f_choices, "expected an array".into()))?
            .iter()
            .map(|c| c.as_str().map(|s| s.trim().to_string()))
            .collect::<Option<_>>()
            .ok_or_else(|| bad(f_choices, "expected strings".into()))?;
        let answer = match obj.get(f_answer) {
            Some(Value::Number(n)) => n.to_string(),
            Some(Value::String(s)) => s.trim().to_string(),
            _ => return Err(bad(f_answer, "expected a string or number".into())),
        };
        let gold = match choices.iter().position(|c| *c == answer) {
            Some(i) => i,
            None => parse_gold_label(&answer, choices.len()).map_err(|e| bad(f_answer, e.to_string()))?,
        };
        let explanation = f_explanations
            .iter()
            .find_map(|f| text_field(&obj, f))
            .filter(|s| !s.is_empty());
        let rec = ChoiceRecord {
            id: format!("{}-{}", dataset.name(), out.len()),
            prompt: question,
            choices,
            gold_index: gold,
            explanation,
        };
        rec.validate(dataset).map_err(|e| bad(f_choices, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

/// OMCS: one fact per non-blank line.
pub fn load_omcs(path: &Path) -> Result<Vec<FactStatement>, IngestError> {
    lines(path)?
        .into_iter()
        .map(|(line, text)| FactStatement::new(&text).map_err(|e| core_error(path, line, "fact", e)))
        .collect()
}

/// Non-blank lines with their 1-based numbers.
fn lines(path: &Path) -> Result<Vec<(u64, String)>, IngestError> {
    let io = |source| IngestError::Io { path: path.into(), source };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if !line.trim().is_empty() {
            out.push((i as u64 + 1, line));
        }
    }
    Ok(out)
}
