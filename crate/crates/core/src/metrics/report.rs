use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // needed only when std is absent from the build
use num_traits::Float;

use super::{bleu, ea_score, gen_length, perplexity, uni, EaClassifier, LanguageModel};
use crate::{Error, Result};

/// Metric columns of a report row, in display order.
pub const REPORT_COLUMNS: [&str; 6] = ["BLEU", "PPL-Gen", "PPL-Trg", "EA", "UNI", "Length"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    /// Corpus BLEU in `[0, 1]`.
    pub bleu: f64,
    pub ppl_gen: f64,
    pub ppl_trg: f64,
    pub ea: f64,
    pub uni_mean: f64,
    pub uni_std: f64,
    pub len_mean: f64,
    pub len_std: f64,
}

/// One system's row; a failed system keeps its error message in place of
/// metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemRow {
    pub system: String,
    pub metrics: core::result::Result<MetricsRow, String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<SystemRow>,
}

/// Mean and sample (n - 1) standard deviation; the deviation of fewer than
/// two values is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Computes every report column for one system's generations.
pub fn evaluate_all<G, S, R>(
    generations: &[G],
    sources: &[S],
    reference_sets: &[Vec<R>],
    trg_lm: &dyn LanguageModel,
    gen_lm: &dyn LanguageModel,
    ea: &EaClassifier,
) -> Result<MetricsRow>
where
    G: AsRef<str>,
    S: AsRef<str>,
    R: AsRef<str>,
{
    if generations.len() != sources.len() || generations.len() != reference_sets.len() {
        return Err(Error::LengthMismatch {
            what: "generations, sources and reference sets",
            left: generations.len(),
            right: sources.len().min(reference_sets.len()),
        });
    }
    let bleu = bleu(generations, reference_sets)?;
    let ppl_gen = perplexity(gen_lm, generations)?;
    let ppl_trg = perplexity(trg_lm, generations)?;
    let pairs: Vec<(&str, &str)> = sources
        .iter()
        .zip(generations)
        .map(|(s, g)| (s.as_ref(), g.as_ref()))
        .collect();
    let ea = ea_score(ea, &pairs)?;
    let unis: Vec<f64> = pairs.iter().map(|(s, g)| uni(s, g) as f64).collect();
    let lens: Vec<f64> = generations.iter().map(|g| gen_length(g.as_ref()) as f64).collect();
    let (uni_mean, uni_std) = mean_std(&unis);
    let (len_mean, len_std) = mean_std(&lens);
    Ok(MetricsRow {
        bleu,
        ppl_gen,
        ppl_trg,
        ea,
        uni_mean,
        uni_std,
        len_mean,
        len_std,
    })
}

impl MetricsReport {
    /// CSV with a `System` column followed by the metric columns; UNI and
    /// Length are split into mean and std. Failed rows read `ERR`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("System,BLEU,PPL-Gen,PPL-Trg,EA,UNI-mean,UNI-std,Length-mean,Length-std\n");
        for row in &self.rows {
            let cells: Vec<String> = match &row.metrics {
                Ok(m) => [m.bleu, m.ppl_gen, m.ppl_trg, m.ea, m.uni_mean, m.uni_std, m.len_mean, m.len_std]
                    .iter()
                    .map(|v| format!("{v:.6}"))
                    .collect(),
                Err(_) => (0..8).map(|_| String::from("ERR")).collect(),
            };
            out.push_str(&format!("{},{}\n", csv_field(&row.system), cells.join(",")));
        }
        out
    }

    /// Aligned plain-text table; BLEU is shown as a percentage.
    pub fn to_table(&self) -> String {
        let header: Vec<String> = core::iter::once("Models")
            .chain(REPORT_COLUMNS)
            .map(String::from)
            .collect();
        let mut rows = alloc::vec![header];
        for row in &self.rows {
            let mut cells = alloc::vec![row.system.clone()];
            match &row.metrics {
                Ok(m) => cells.extend([
                    format!("{:.2}", m.bleu * 100.0),
                    format!("{:.2}", m.ppl_gen),
                    format!("{:.2}", m.ppl_trg),
                    format!("{:.2}", m.ea),
                    format!("{:.2} ± {:.2}", m.uni_mean, m.uni_std),
                    format!("{:.2} ± {:.2}", m.len_mean, m.len_std),
                ]),
                Err(e) => {
                    cells.extend((0..REPORT_COLUMNS.len()).map(|_| String::from("ERR")));
                    cells[1] = format!("ERR ({e})");
                }
            }
            rows.push(cells);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, r) in rows.iter().enumerate() {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .map(|(cell, &w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
                .collect();
            out.push_str(line.join(" | ").trim_end());
            out.push('\n');
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
                out.push_str(&rule.join("-+-"));
                out.push('\n');
            }
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        String::from(s)
    }
}
