//! Hashed unigram + bigram features.
//!
//! Text is lowercased and split into runs of alphanumeric characters (an inner
//! apostrophe stays in the word) and single punctuation characters.
//! Occurrences of the turn separator become one boundary token. Every distinct
//! unigram and bigram sets its bucket to 1.

use alloc::string::String;
use alloc::vec::Vec;

use crate::rng::fnv1a64;

pub const DEFAULT_BUCKETS: usize = 1 << 18;

const BOUNDARY: &str = "\u{1}sep";

/// Sparse feature vector: sorted, distinct bucket indices with their values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseFeatures {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseFeatures {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureHasher {
    pub seed: u64,
    pub buckets: usize,
}

impl FeatureHasher {
    pub fn new(seed: u64, buckets: usize) -> Self {
        assert!(buckets > 0, "feature hasher needs at least one bucket");
        Self { seed, buckets }
    }

    /// Bucket of a single token string.
    pub fn bucket(&self, token: &str) -> usize {
        let mut bytes = Vec::with_capacity(8 + token.len());
        bytes.extend_from_slice(&self.seed.to_le_bytes());
        bytes.extend_from_slice(token.as_bytes());
        (fnv1a64(&bytes) % self.buckets as u64) as usize
    }

    pub fn features(&self, text: &str, separator: &str) -> SparseFeatures {
        let tokens = tokenize(text, separator);
        let mut idx: Vec<u32> = Vec::with_capacity(tokens.len() * 2);
        for t in &tokens {
            idx.push(self.bucket(t) as u32);
        }
        let mut bigram = String::new();
        for pair in tokens.windows(2) {
            bigram.clear();
            bigram.push_str(&pair[0]);
            bigram.push('\u{1}');
            bigram.push_str(&pair[1]);
            idx.push(self.bucket(&bigram) as u32);
        }
        idx.sort_unstable();
        idx.dedup();
        let values = alloc::vec![1.0; idx.len()];
        SparseFeatures { indices: idx, values }
    }
}

/// Splits model input into lowercase tokens, mapping `separator` to a
/// boundary token.
pub fn tokenize(text: &str, separator: &str) -> Vec<String> {
    let mut out = Vec::new();
    let pieces: Vec<&str> =
        if separator.trim().is_empty() { alloc::vec![text] } else { text.split(separator).collect() };
    for (i, piece) in pieces.iter().enumerate() {
        if i > 0 {
            out.push(BOUNDARY.into());
        }
        tokenize_piece(piece, &mut out);
    }
    out
}

fn tokenize_piece(text: &str, out: &mut Vec<String>) {
    let mut word = String::new();
    let mut chars = text.chars().peekable();
    while let Some(ch) = chars.next() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
        } else if ch == '\'' && !word.is_empty() && chars.peek().is_some_and(|c| c.is_alphanumeric()) {
            word.push('\'');
        } else {
            if !word.is_empty() {
                out.push(core::mem::take(&mut word));
            }
            if !ch.is_whitespace() {
                out.push(ch.into());
            }
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(
            tokenize("What's the capital of France?", "[SEP]"),
            vec!["what's", "the", "capital", "of", "france", "?"]
        );
        assert_eq!(tokenize("hi [SEP] Bye!", "[SEP]"), vec!["hi", BOUNDARY, "bye", "!"]);
        assert!(tokenize("", "[SEP]").is_empty());
    }

    #[test]
    fn features_are_pure_functions_of_text() {
        let h = FeatureHasher::new(42, DEFAULT_BUCKETS);
        let a = h.features("please remind me", "[SEP]");
        let b = h.features("please remind me", "[SEP]");
        assert_eq!(a, b);
        // 3 unigrams + 2 bigrams, barring collisions
        assert_eq!(a.len(), 5);
        assert!(a.indices.windows(2).all(|w| w[0] < w[1]));
        assert_ne!(FeatureHasher::new(43, DEFAULT_BUCKETS).features("please remind me", "[SEP]"), a);
    }

    #[test]
    fn repeated_tokens_are_deduplicated() {
        let h = FeatureHasher::new(0, 1 << 10);
        let f = h.features("yes yes yes", "[SEP]");
        // "yes" and "yes yes"
        assert_eq!(f.len(), 2);
    }
}
