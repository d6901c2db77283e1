//! Estimated approval: a linear discriminator over hashed n-gram features
//! of "source <sep> candidate".

use alloc::string::String;
use alloc::vec::Vec;
use core::hash::Hasher;

#[allow(unused_imports)] // needed only when std is absent from the build
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::text::word_tokens;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EaConfig {
    /// Feature space has `2^buckets_log2` hashed buckets.
    pub buckets_log2: u32,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for EaConfig {
    fn default() -> Self {
        EaConfig {
            buckets_log2: 18,
            epochs: 10,
            learning_rate: 0.5,
            l2: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EaClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
}

impl EaClassifier {
    /// An untrained classifier: every input scores exactly 0.5.
    pub fn zeros(buckets_log2: u32) -> Self {
        EaClassifier {
            weights: alloc::vec![0.0; 1 << buckets_log2],
            bias: 0.0,
            threshold: 0.5,
        }
    }

    fn features(&self, source: &str, candidate: &str) -> Vec<(usize, f64)> {
        features(source, candidate, self.weights.len())
    }

    /// P(valid | source, candidate).
    pub fn probability(&self, source: &str, candidate: &str) -> f64 {
        let z = self.bias
            + self
                .features(source, candidate)
                .iter()
                .map(|&(i, v)| self.weights[i] * v)
                .sum::<f64>();
        sigmoid(z)
    }

    pub fn approves(&self, source: &str, candidate: &str) -> bool {
        self.probability(source, candidate) >= self.threshold
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn bucket(text: &str, buckets: usize) -> usize {
    let mut h = fnv::FnvHasher::default();
    h.write(text.as_bytes());
    (h.finish() as usize) & (buckets - 1)
}

/// Unigram and bigram indicators of the joined token sequence, scaled to
/// unit norm.
fn features(source: &str, candidate: &str, buckets: usize) -> Vec<(usize, f64)> {
    let mut toks = word_tokens(source);
    toks.push(String::from("<sep>"));
    toks.extend(word_tokens(candidate));
    let mut idx: Vec<usize> = toks.iter().map(|t| bucket(&alloc::format!("u:{t}"), buckets)).collect();
    idx.extend(
        toks.windows(2)
            .map(|w| bucket(&alloc::format!("b:{} {}", w[0], w[1]), buckets)),
    );
    idx.sort_unstable();
    idx.dedup();
    let scale = 1.0 / (idx.len() as f64).sqrt();
    idx.into_iter().map(|i| (i, scale)).collect()
}

/// Logistic regression by seeded SGD, with each class weighted to
/// contribute equally.
pub fn fit_ea(positives: &[(String, String)], negatives: &[(String, String)], cfg: &EaConfig) -> Result<EaClassifier> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::SingleClass);
    }
    if cfg.buckets_log2 == 0 || cfg.buckets_log2 > 26 || !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidConfig("EA buckets or learning rate out of range".into()));
    }
    let mut clf = EaClassifier::zeros(cfg.buckets_log2);
    let n = (positives.len() + negatives.len()) as f64;
    let w_pos = n / (2.0 * positives.len() as f64);
    let w_neg = n / (2.0 * negatives.len() as f64);
    let data: Vec<(Vec<(usize, f64)>, f64, f64)> = positives
        .iter()
        .map(|(s, c)| (clf.features(s, c), 1.0, w_pos))
        .chain(negatives.iter().map(|(s, c)| (clf.features(s, c), 0.0, w_neg)))
        .collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (feats, y, weight) = &data[i];
            let z = clf.bias + feats.iter().map(|&(j, v)| clf.weights[j] * v).sum::<f64>();
            let g = (sigmoid(z) - y) * weight;
            clf.bias -= cfg.learning_rate * g;
            for &(j, v) in feats {
                let wj = &mut clf.weights[j];
                *wj -= cfg.learning_rate * (g * v + cfg.l2 * *wj);
            }
        }
    }
    Ok(clf)
}

/// Fraction of pairs whose approval probability reaches the threshold.
pub fn ea_score<S: AsRef<str>, G: AsRef<str>>(clf: &EaClassifier, pairs: &[(S, G)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("EA pairs"));
    }
    let approved = pairs
        .iter()
        .filter(|(s, g)| clf.approves(s.as_ref(), g.as_ref()))
        .count();
    Ok(approved as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn pair(s: &str, c: &str) -> (String, String) {
        (s.into(), c.into())
    }

    #[test]
    fn zero_weights_approve_everything_at_the_threshold() {
        let clf = EaClassifier::zeros(8);
        assert_eq!(clf.probability("x", "y"), 0.5);
        assert_eq!(ea_score(&clf, &[("a", "b"), ("c", "d")]).unwrap(), 1.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let p = [pair("a", "b")];
        assert_eq!(fit_ea(&p, &[], &EaConfig::default()).unwrap_err(), Error::SingleClass);
    }

    #[test]
    fn learns_a_marker_token() {
        let pos: Vec<_> = (0..40).map(|i| pair(&format!("s{i}"), &format!("w{} because", i % 7))).collect();
        let neg: Vec<_> = (0..40).map(|i| pair(&format!("s{i}"), &format!("w{}", i % 7))).collect();
        let clf = fit_ea(&pos, &neg, &EaConfig::default()).unwrap();
        assert_eq!(ea_score(&clf, &pos).unwrap(), 1.0);
        assert_eq!(ea_score(&clf, &neg).unwrap(), 0.0);
        let p = clf.probability("anything", "x");
        assert!((0.0..=1.0).contains(&p));
    }
}
