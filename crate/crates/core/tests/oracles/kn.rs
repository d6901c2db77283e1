//! Interpolated Kneser-Ney evaluated straight from the definition: every
//! count is recomputed by scanning the padded sentences.

use union_core::metrics::{BOS, EOS, UNK};

pub struct Direct {
    order: usize,
    sents: Vec<Vec<String>>,
    pub vocab_size: usize,
}

impl Direct {
    pub fn new(corpus: &[&str], order: usize) -> Self {
        let sents: Vec<Vec<String>> = corpus
            .iter()
            .map(|s| {
                let mut p = vec![BOS.to_string(); order - 1];
                p.extend(s.split_whitespace().map(str::to_string));
                p.push(EOS.to_string());
                p
            })
            .collect();
        let mut words: Vec<&String> = sents.iter().flatten().filter(|w| *w != BOS).collect();
        words.sort();
        words.dedup();
        let vocab_size = words.len() + usize::from(!words.iter().any(|w| *w == UNK));
        Direct { order, sents, vocab_size }
    }

    /// Every n-gram occurrence ending at a predicted position.
    fn grams(&self, n: usize) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for s in &self.sents {
            for end in self.order - 1..s.len() {
                if end + 1 >= n {
                    out.push(s[end + 1 - n..=end].to_vec());
                }
            }
        }
        out
    }

    /// Raw count at the top order, distinct left extensions below it.
    fn count(&self, gram: &[String]) -> f64 {
        let n = gram.len();
        if n == self.order {
            return self.grams(n).iter().filter(|g| g[..] == *gram).count() as f64;
        }
        let mut lefts: Vec<String> = self
            .grams(n + 1)
            .into_iter()
            .filter(|g| g[1..] == *gram)
            .map(|g| g[0].clone())
            .collect();
        lefts.sort();
        lefts.dedup();
        lefts.len() as f64
    }

    fn distinct(&self, n: usize) -> Vec<Vec<String>> {
        let mut g = self.grams(n);
        g.sort();
        g.dedup();
        if n < self.order {
            g.retain(|x| self.count(x) > 0.0);
        }
        g
    }

    pub fn discount(&self, n: usize) -> f64 {
        let all = self.distinct(n);
        let n1 = all.iter().filter(|g| self.count(g) == 1.0).count() as f64;
        let n2 = all.iter().filter(|g| self.count(g) == 2.0).count() as f64;
        if n1 == 0.0 || n1 + 2.0 * n2 == 0.0 {
            0.5
        } else {
            n1 / (n1 + 2.0 * n2)
        }
    }

    pub fn prob(&self, ctx: &[String], w: &str) -> f64 {
        let lower = || {
            if ctx.is_empty() {
                1.0 / self.vocab_size as f64
            } else {
                self.prob(&ctx[1..], w)
            }
        };
        let n = ctx.len() + 1;
        let follows: Vec<Vec<String>> = self.distinct(n).into_iter().filter(|g| g[..n - 1] == *ctx).collect();
        let total: f64 = follows.iter().map(|g| self.count(g)).sum();
        if total == 0.0 {
            return lower();
        }
        let mut gram = ctx.to_vec();
        gram.push(w.to_string());
        let d = self.discount(n);
        ((self.count(&gram) - d).max(0.0) + d * follows.len() as f64 * lower()) / total
    }
}
