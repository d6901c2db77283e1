use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // needed only when std is absent from the build
use num_traits::Float;

use crate::text::word_tokens;
use crate::{Error, Result};

const MAX_ORDER: usize = 4;

/// Corpus BLEU over lowercased word tokens (see [`bleu_tokens`]).
pub fn bleu<C, R>(candidates: &[C], references: &[Vec<R>]) -> Result<f64>
where
    C: AsRef<str>,
    R: AsRef<str>,
{
    let cands: Vec<Vec<String>> = candidates.iter().map(|c| word_tokens(c.as_ref())).collect();
    let refs: Vec<Vec<Vec<String>>> = references
        .iter()
        .map(|set| set.iter().map(|r| word_tokens(r.as_ref())).collect())
        .collect();
    bleu_tokens(&cands, &refs)
}

/// Unsmoothed corpus BLEU with uniform weights over 1..=4-grams.
///
/// Clipped counts use the per-n-gram maximum over a candidate's
/// references; the brevity penalty uses, per candidate, the reference
/// length closest to the candidate length (shorter wins ties). Any order
/// with no matches at corpus level makes the score 0.
pub fn bleu_tokens<T: AsRef<str> + Ord>(candidates: &[Vec<T>], references: &[Vec<Vec<T>>]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("BLEU candidates"));
    }
    if candidates.len() != references.len() {
        return Err(Error::LengthMismatch {
            what: "candidates and reference sets",
            left: candidates.len(),
            right: references.len(),
        });
    }
    let mut matched = [0usize; MAX_ORDER];
    let mut total = [0usize; MAX_ORDER];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    for (cand, refs) in candidates.iter().zip(references) {
        if refs.is_empty() {
            return Err(Error::EmptyInput("BLEU reference set"));
        }
        cand_len += cand.len();
        ref_len += refs
            .iter()
            .map(Vec::len)
            .min_by_key(|&r| (r.abs_diff(cand.len()), r))
            .unwrap();
        for n in 1..=MAX_ORDER {
            let counts = ngram_counts(cand, n);
            let mut max_ref: BTreeMap<&[T], usize> = BTreeMap::new();
            for r in refs {
                for (g, c) in ngram_counts(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            for (g, c) in counts {
                total[n - 1] += c;
                matched[n - 1] += c.min(max_ref.get(g).copied().unwrap_or(0));
            }
        }
    }
    if matched.iter().any(|&m| m == 0) {
        return Ok(0.0);
    }
    let log_precision: f64 = (0..MAX_ORDER)
        .map(|i| (matched[i] as f64 / total[i] as f64).ln())
        .sum::<f64>()
        / MAX_ORDER as f64;
    let bp = if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    Ok(bp * log_precision.exp())
}

fn ngram_counts<T: Ord>(tokens: &[T], n: usize) -> BTreeMap<&[T], usize> {
    let mut out = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn exact_match_scores_one() {
        let c = ["the cat sat on the mat", "a dog runs in the park"];
        let r = vec![vec!["x y", "the cat sat on the mat"], vec!["a dog runs in the park"]];
        assert_eq!(bleu(&c, &r).unwrap(), 1.0);
    }

    #[test]
    fn brevity_penalty_fixture() {
        let got = bleu(&["a b c d"], &[vec!["a b c d e"]]).unwrap();
        assert!((got - (-0.25f64).exp()).abs() < 1e-12);
        assert!((got - 0.7788).abs() < 1e-4);
    }

    #[test]
    fn good_explanation_with_little_overlap_scores_low() {
        let refs = vec![vec![
            "A book is used to study",
            "A book does not have the ability to show what time it is.",
            "Books don't tell the time",
        ]];
        let got = bleu(&["Book is not a timekeeping device."], &refs).unwrap();
        assert!(got < 0.3);
    }

    #[test]
    fn errors_and_zero_cases() {
        let none: [&str; 0] = [];
        assert!(bleu(&none, &Vec::<Vec<&str>>::new()).is_err());
        assert!(bleu(&["a"], &[vec!["a"], vec!["b"]]).is_err());
        assert!(bleu(&["a b"], &[Vec::<&str>::new()]).is_err());
        assert_eq!(bleu(&["w x y z"], &[vec!["a b c d"]]).unwrap(), 0.0);
    }
}
