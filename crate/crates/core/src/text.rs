//! Tokenization shared by retrieval, claim ranking, reliability and the
//! lexical stance baseline.

use std::collections::BTreeSet;

/// Lowercases, splits on any non-alphanumeric character and drops tokens
/// shorter than two characters. No stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_owned)
        .collect()
}

/// Function words ignored when measuring content overlap.
pub const STOPWORDS: &[&str] = &[
    "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been", "being",
    "between", "both", "but", "by", "can", "could", "did", "do", "does", "during", "each", "for",
    "from", "had", "has", "have", "how", "if", "in", "into", "is", "it", "its", "may", "might",
    "more", "most", "of", "on", "or", "other", "over", "should", "so", "such", "than", "that",
    "the", "their", "them", "then", "there", "these", "they", "this", "those", "to", "was",
    "we", "were", "what", "when", "which", "while", "who", "will", "with", "would", "yes",
    // negation markers are handled separately by the stance baseline
    "no", "not", "without", "failed",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&token)
}

/// Unique non-stopword tokens, sorted.
pub fn content_tokens(text: &str) -> BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_lowercases_and_drops_short_tokens() {
        assert_eq!(
            tokenize("Aspirin (ASA) reduces stroke-risk by 2.5%, a lot!"),
            vec!["aspirin", "asa", "reduces", "stroke", "risk", "by", "lot"]
        );
    }

    #[test]
    fn content_tokens_skip_stopwords() {
        let t = content_tokens("Does aspirin reduce the risk of stroke?");
        assert_eq!(
            t.into_iter().collect::<Vec<_>>(),
            vec!["aspirin", "reduce", "risk", "stroke"]
        );
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(s in "\\PC{0,80}") {
            let once = tokenize(&s);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }
    }
}
