use std::collections::{BTreeMap, HashMap, HashSet};

use ndarray::Array2;

use super::tokenize::{tokens, word_ngrams};
use super::{EmbedError, EmbeddingBlock};

/// Vocabulary and smoothed idf weights learned from a training corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    pub ngram_lo: usize,
    pub ngram_hi: usize,
    /// Term -> column, columns in lexicographic term order.
    pub vocabulary: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
}

impl TfIdfModel {
    pub fn dim(&self) -> usize {
        self.idf.len()
    }
}

pub fn tfidf_fit<S: AsRef<str>>(
    train_texts: &[S],
    ngram_lo: usize,
    ngram_hi: usize,
    max_vocab: usize,
) -> Result<TfIdfModel, EmbedError> {
    let n_docs = train_texts.len();
    let mut df: HashMap<String, usize> = HashMap::new();
    for text in train_texts {
        let grams: HashSet<String> = word_ngrams(&tokens(text.as_ref()), ngram_lo, ngram_hi).into_iter().collect();
        for g in grams {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    if n_docs == 0 || df.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    let mut ranked: Vec<(String, usize)> = df.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_vocab.max(1));
    ranked.sort_by(|a, b| a.0.cmp(&b.0));
    let idf = ranked
        .iter()
        .map(|(_, d)| ((1.0 + n_docs as f64) / (1.0 + *d as f64)).ln() + 1.0)
        .collect();
    let vocabulary = ranked.into_iter().enumerate().map(|(i, (t, _))| (t, i)).collect();
    Ok(TfIdfModel { ngram_lo, ngram_hi, vocabulary, idf })
}

/// Raw-count tf times idf, each row scaled to unit L2 norm.
pub fn tfidf_transform<S: AsRef<str>>(model: &TfIdfModel, texts: &[S], source_column: &str) -> EmbeddingBlock {
    let mut matrix = Array2::<f64>::zeros((texts.len(), model.dim()));
    for (i, text) in texts.iter().enumerate() {
        let mut row = matrix.row_mut(i);
        for g in word_ngrams(&tokens(text.as_ref()), model.ngram_lo, model.ngram_hi) {
            if let Some(&j) = model.vocabulary.get(&g) {
                row[j] += 1.0;
            }
        }
        for (j, v) in row.iter_mut().enumerate() {
            *v *= model.idf[j];
        }
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    EmbeddingBlock::new(source_column, matrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idf_of_shared_term_is_one() {
        let m = tfidf_fit(&["a b", "a c"], 1, 1, 100).unwrap();
        let a = m.vocabulary["a"];
        assert!((m.idf[a] - 1.0).abs() < 1e-12);
        let b = m.vocabulary["b"];
        assert!((m.idf[b] - ((3.0f64 / 2.0).ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn oov_document_is_zero() {
        let m = tfidf_fit(&["good great", "number three"], 1, 2, 100).unwrap();
        let block = tfidf_transform(&m, &["nice two"], "t");
        assert!(block.matrix.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rows_have_unit_norm() {
        let corpus = ["the cat sat", "the dog sat down", "a bird"];
        let m = tfidf_fit(&corpus, 1, 2, 100).unwrap();
        let block = tfidf_transform(&m, &corpus, "t");
        for row in block.matrix.rows() {
            assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn vocabulary_cap_keeps_most_frequent_then_lexicographic() {
        let m = tfidf_fit(&["z y x", "z y", "z w"], 1, 1, 2).unwrap();
        assert_eq!(m.vocabulary.keys().collect::<Vec<_>>(), vec!["y", "z"]);
        let m = tfidf_fit(&["b a", "c"], 1, 1, 2).unwrap();
        assert_eq!(m.vocabulary.keys().collect::<Vec<_>>(), vec!["a", "b"]);
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(tfidf_fit::<&str>(&[], 1, 2, 10), Err(EmbedError::EmptyCorpus)));
        assert!(matches!(tfidf_fit(&["", "  "], 1, 2, 10), Err(EmbedError::EmptyCorpus)));
    }
}
