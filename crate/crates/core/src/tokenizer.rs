//! Word-level vocabulary with reserved special tokens, and rendering of
//! training sequences for the two heads.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::{Dataset, KeywordTable};
use crate::text::word_tokens;
use crate::{Error, Result};

/// Default maximum rendered sequence length.
pub const DEFAULT_MAX_SEQ_LEN: usize = 128;

/// Reserved tokens. Their discriminants are their ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[repr(u32)]
pub enum Special {
    Pad = 0,
    Bos = 1,
    Eos = 2,
    Sep = 3,
    Unk = 4,
    KwComve = 5,
    KwCose = 6,
    KwOpenbook = 7,
    KwOmcs = 8,
}

pub const NUM_SPECIALS: usize = 9;

impl Special {
    pub const fn id(self) -> u32 {
        self as u32
    }

    pub fn keyword(dataset: Dataset) -> Special {
        match dataset {
            Dataset::Comve => Special::KwComve,
            Dataset::Cose => Special::KwCose,
            Dataset::Openbook => Special::KwOpenbook,
            Dataset::Omcs => Special::KwOmcs,
        }
    }

    fn keyword_dataset(id: u32) -> Option<Dataset> {
        match id {
            5 => Some(Dataset::Comve),
            6 => Some(Dataset::Cose),
            7 => Some(Dataset::Openbook),
            8 => Some(Dataset::Omcs),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocab {
    /// Rebuilds a vocabulary from its token list (for example one read from
    /// disk). The first [`NUM_SPECIALS`] entries are the special tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < NUM_SPECIALS {
            return Err(Error::InvalidConfig("vocabulary shorter than the special set".into()));
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidConfig(alloc::format!("duplicate token {t:?}")));
            }
        }
        let vocab = Vocab { tokens, index };
        let table = vocab.keyword_table();
        table.validate()?;
        for t in &vocab.tokens[NUM_SPECIALS..] {
            if word_tokens(t).len() != 1 || word_tokens(t)[0] != *t {
                return Err(Error::InvalidConfig(alloc::format!("token {t:?} is not a word token")));
            }
        }
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn specials(&self) -> &[String] {
        &self.tokens[..NUM_SPECIALS]
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn is_special(id: u32) -> bool {
        (id as usize) < NUM_SPECIALS
    }

    pub fn keyword_table(&self) -> KeywordTable {
        let s = |sp: Special| self.tokens[sp.id() as usize].clone();
        KeywordTable {
            comve: s(Special::KwComve),
            cose: s(Special::KwCose),
            openbook: s(Special::KwOpenbook),
            omcs: s(Special::KwOmcs),
        }
    }

    /// Resolves a keyword surface form to its id and dataset.
    pub fn keyword(&self, keyword: &str) -> Result<(u32, Dataset)> {
        self.id(keyword)
            .and_then(|id| Special::keyword_dataset(id).map(|d| (id, d)))
            .ok_or_else(|| Error::InvalidKeyword(keyword.into()))
    }

    /// Hash identifying this exact token inventory.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::new();
        for t in &self.tokens {
            bytes.extend_from_slice(t.as_bytes());
            bytes.push(0);
        }
        crate::stable_hash(&bytes)
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        word_tokens(text)
            .iter()
            .map(|t| self.id(t).unwrap_or(Special::Unk.id()))
            .collect()
    }

    /// Joins non-special tokens with single spaces, stopping at the first EOS.
    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut out = String::new();
        for &id in ids {
            if id as usize >= self.len() {
                return Err(Error::TokenOutOfRange { id, size: self.len() });
            }
            if id == Special::Eos.id() {
                break;
            }
            if Vocab::is_special(id) {
                continue;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&self.tokens[id as usize]);
        }
        Ok(out)
    }
}

/// Builds a vocabulary with the default keyword surface forms.
pub fn build_vocab<'a, I>(corpus: I, max_size: usize, min_count: usize) -> Result<Vocab>
where
    I: IntoIterator<Item = &'a str>,
{
    build_vocab_with_keywords(corpus, max_size, min_count, &KeywordTable::default())
}

/// Specials first, then corpus tokens by descending frequency with
/// lexicographic tie-break, truncated to `max_size` entries.
pub fn build_vocab_with_keywords<'a, I>(
    corpus: I,
    max_size: usize,
    min_count: usize,
    keywords: &KeywordTable,
) -> Result<Vocab>
where
    I: IntoIterator<Item = &'a str>,
{
    if max_size <= NUM_SPECIALS {
        return Err(Error::InvalidConfig(alloc::format!(
            "max_size {max_size} must exceed the {NUM_SPECIALS} special tokens"
        )));
    }
    keywords.validate()?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for text in corpus {
        for tok in word_tokens(text) {
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count.max(1))
        .collect();
    // BTreeMap iteration is lexicographic, and the sort is stable.
    ranked.sort_by(|a, b| b.1.cmp(&a.1));

    let mut tokens: Vec<String> = ["<pad>", "<bos>", "<eos>", "<sep>", "<unk>"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for d in Dataset::ALL {
        tokens.push(keywords.keyword(d).into());
    }
    tokens.extend(
        ranked
            .into_iter()
            .map(|(t, _)| t)
            .take(max_size - NUM_SPECIALS),
    );
    Vocab::from_tokens(tokens)
}

/// Token ids plus the positions that count towards the LM loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub loss_mask: Vec<bool>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn supervised(&self) -> usize {
        self.loss_mask.iter().filter(|&&m| m).count()
    }
}

/// `[BOS, c] ++ source ++ [SEP]`, with the source cut from the left so the
/// prompt plus `reserve` more tokens fits in `max_len`.
pub fn render_prompt(vocab: &Vocab, keyword: &str, source: &str, max_len: usize, reserve: usize) -> Result<Vec<u32>> {
    let (kw, _) = vocab.keyword(keyword)?;
    let mut src = vocab.encode(source);
    let budget = max_len.saturating_sub(3 + reserve);
    if src.len() > budget {
        src.drain(..src.len() - budget);
    }
    let mut ids = Vec::with_capacity(src.len() + 3);
    ids.push(Special::Bos.id());
    ids.push(kw);
    ids.extend(src);
    ids.push(Special::Sep.id());
    if ids.len() + reserve > max_len {
        return Err(Error::SequenceTooLong {
            len: ids.len() + reserve,
            max: max_len,
        });
    }
    Ok(ids)
}

/// `[BOS, c] ++ source ++ [SEP] ++ target ++ [EOS]`; the loss mask covers
/// the target and the EOS.
pub fn render_generation_sequence(
    vocab: &Vocab,
    keyword: &str,
    source: &str,
    target: &str,
    max_len: usize,
) -> Result<TokenSequence> {
    let tgt = vocab.encode(target);
    let mut ids = render_prompt(vocab, keyword, source, max_len, tgt.len() + 1)?;
    let prompt_len = ids.len();
    ids.extend(tgt);
    ids.push(Special::Eos.id());
    let loss_mask = (0..ids.len()).map(|i| i >= prompt_len).collect();
    Ok(TokenSequence { ids, loss_mask })
}

/// `[BOS, c] ++ source ++ ([SEP] ++ choice)* ++ [EOS]`, no LM supervision.
pub fn render_classification_sequence(
    vocab: &Vocab,
    keyword: &str,
    source: &str,
    choices: &[String],
    max_len: usize,
) -> Result<TokenSequence> {
    if !(3..=5).contains(&choices.len()) {
        return Err(Error::Arity {
            what: "classification choices",
            expected: "3 to 5".into(),
            found: choices.len(),
        });
    }
    let mut tail = Vec::new();
    for c in choices {
        let enc = vocab.encode(c);
        if enc.is_empty() {
            return Err(Error::EmptyText("choice"));
        }
        tail.push(Special::Sep.id());
        tail.extend(enc);
    }
    tail.push(Special::Eos.id());
    // render_prompt appends one SEP; reuse it as the first choice separator.
    let mut ids = render_prompt(vocab, keyword, source, max_len, tail.len() - 1)?;
    ids.extend_from_slice(&tail[1..]);
    let loss_mask = alloc::vec![false; ids.len()];
    Ok(TokenSequence { ids, loss_mask })
}
