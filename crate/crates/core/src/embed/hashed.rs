use ndarray::Array2;

use super::tokenize::{fnv1a64, tokens, word_ngrams};
use super::EmbeddingBlock;

/// Number of trailing meta-features added by `add_length_features`.
pub const LENGTH_FEATURES: usize = 3;

/// Bucket of an n-gram: the 64-bit FNV-1a hash xor-folded to 32 bits, then
/// reduced modulo `buckets`.
pub fn bucket_of(gram: &str, buckets: usize) -> usize {
    let h = fnv1a64(gram.as_bytes());
    ((h ^ (h >> 32)) & 0xffff_ffff) as usize % buckets
}

/// Word 1..3-gram counts hashed into `buckets`, optionally followed by
/// `[char_count, word_count, uppercase_ratio]`. Stateless.
pub fn hashed_ngram_transform<S: AsRef<str>>(
    texts: &[S],
    buckets: usize,
    add_length_features: bool,
    source_column: &str,
) -> EmbeddingBlock {
    let width = buckets + if add_length_features { LENGTH_FEATURES } else { 0 };
    let mut matrix = Array2::zeros((texts.len(), width));
    for (i, text) in texts.iter().enumerate() {
        let text = text.as_ref();
        let mut row = matrix.row_mut(i);
        for g in word_ngrams(&tokens(text), 1, 3) {
            row[bucket_of(&g, buckets)] += 1.0;
        }
        if add_length_features {
            let chars = text.chars().count();
            let upper = text.chars().filter(|c| c.is_uppercase()).count();
            row[buckets] = chars as f64;
            row[buckets + 1] = text.split_whitespace().count() as f64;
            row[buckets + 2] = if chars == 0 { 0.0 } else { upper as f64 / chars as f64 };
        }
    }
    EmbeddingBlock::new(source_column, matrix)
}
