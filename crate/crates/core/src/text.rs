//! Text canonicalization shared by the tokenizer, the pairing logic and the
//! metrics.

use alloc::string::String;
use alloc::vec::Vec;

/// Lowercased word-level tokens. Runs of alphanumeric characters form one
/// token; every other non-whitespace character is a token on its own.
pub fn word_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(core::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            out.push(ch.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// Tokens used by UNI and Length: whitespace split, lowercased, with every
/// non-alphanumeric character removed. Tokens that become empty are dropped.
pub fn metric_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let tok: String = raw
                .chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect();
            (!tok.is_empty()).then_some(tok)
        })
        .collect()
}

/// Key used to match Task B and Task C records that share a false
/// statement: lowercase, collapsed whitespace, terminal punctuation removed.
pub fn statement_key(text: &str) -> String {
    let mut joined = String::with_capacity(text.len());
    for (i, part) in text.split_whitespace().enumerate() {
        if i > 0 {
            joined.push(' ');
        }
        joined.extend(part.chars().flat_map(char::to_lowercase));
    }
    let trimmed = joined.trim_end_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace());
    String::from(trimmed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_tokens_split_punctuation() {
        assert_eq!(
            word_tokens("Cars don't fly."),
            ["cars", "don", "'", "t", "fly", "."]
        );
        assert!(word_tokens("   ").is_empty());
    }

    #[test]
    fn metric_tokens_strip_punctuation() {
        assert_eq!(
            metric_tokens("Cars are not designed to fly."),
            ["cars", "are", "not", "designed", "to", "fly"]
        );
        assert_eq!(metric_tokens("don't -- ok"), ["dont", "ok"]);
    }

    #[test]
    fn statement_key_ignores_case_spacing_and_trailing_period() {
        assert_eq!(
            statement_key("We use  book to know the time."),
            statement_key("we use book to know the time")
        );
        assert_eq!(statement_key("Really?!"), "really");
    }
}
