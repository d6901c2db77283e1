use alloc::collections::BTreeSet;

use crate::text::metric_tokens;

/// Number of generation tokens whose surface form does not occur among the
/// source tokens. Occurrences are counted, not types.
pub fn uni(source: &str, generation: &str) -> usize {
    let seen: BTreeSet<_> = metric_tokens(source).into_iter().collect();
    metric_tokens(generation)
        .iter()
        .filter(|t| !seen.contains(*t))
        .count()
}

/// Token count of a generation with punctuation stripped.
pub fn gen_length(generation: &str) -> usize {
    metric_tokens(generation).len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negation_and_substitution_each_add_one_token() {
        let src = "Sugar is used to make coffee sour.";
        assert_eq!(uni(src, "Sugar is used to make coffee sweet."), 1);
        assert_eq!(uni(src, "Sugar is not used to make coffee sour."), 1);
        assert_eq!(uni(src, "coffee is sour"), 0);
    }

    #[test]
    fn repeated_new_tokens_count_each_time() {
        assert_eq!(uni("a b", "c c a"), 2);
    }

    #[test]
    fn length_counts_words_without_punctuation() {
        assert_eq!(gen_length(""), 0);
        assert_eq!(gen_length("Cars are not designed to fly."), 6);
        assert_eq!(gen_length(" -- "), 0);
    }
}
