//! Text embedders and model-ready feature assembly.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{Table, TableError};

mod assemble;
mod external;
mod hashed;
mod tfidf;
mod tokenize;
mod topic;
mod wordvec;

pub use assemble::{
    assemble_features, assemble_with_pipeline, text_values, CategoryCodes, FeatureMatrix, FeaturePipeline, NumericStats,
    Provenance, Target,
};
pub use external::{load_external_embeddings, table_checksum, write_checksum, ExternalEmbeddings};
pub use hashed::{bucket_of, hashed_ngram_transform, LENGTH_FEATURES};
pub use tfidf::{tfidf_fit, tfidf_transform, TfIdfModel};
pub use tokenize::{char_ngrams, fnv1a64, tokens, word_ngrams};
pub use topic::{factorize_dense, topic_fit, topic_fit_with_history, topic_transform, TopicFit, TopicModel};
pub use wordvec::{wordvec_avg_load, wordvec_avg_transform, WordVecModel, TOY_VECTORS};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("text corpus is empty")]
    EmptyCorpus,
    #[error("malformed vector file at line {line}: {message}")]
    MalformedVectorFile { line: usize, message: String },
    #[error("malformed embedding file at line {line}: {message}")]
    MalformedEmbeddingFile { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("embedding file has {found} rows, table has {expected}")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("embedding checksum mismatch: file was computed for a different table (stored {stored}, table {actual})")]
    ChecksumMismatch { stored: String, actual: String },
    #[error("invalid embedder configuration: {0}")]
    InvalidConfig(String),
    #[error("embedder was not prepared with its external resource")]
    Unprepared,
    #[error(transparent)]
    Table(#[from] TableError),
}

fn default_ngram_lo() -> usize {
    1
}
fn default_ngram_hi() -> usize {
    2
}
fn default_max_vocab() -> usize {
    20_000
}
fn default_buckets() -> usize {
    512
}
fn default_true() -> bool {
    true
}
fn default_components() -> usize {
    30
}
fn default_ngram_size() -> usize {
    3
}
fn default_iters() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderKind {
    TfIdf {
        #[serde(default = "default_ngram_lo")]
        ngram_lo: usize,
        #[serde(default = "default_ngram_hi")]
        ngram_hi: usize,
        #[serde(default = "default_max_vocab")]
        max_vocab: usize,
    },
    /// `None` selects the bundled toy vectors.
    WordVecAvg {
        #[serde(default)]
        vector_file: Option<PathBuf>,
    },
    HashedNgram {
        #[serde(default = "default_buckets")]
        buckets: usize,
        #[serde(default = "default_true")]
        add_length_features: bool,
    },
    TopicFactorization {
        #[serde(default = "default_components")]
        n_components: usize,
        #[serde(default = "default_ngram_size")]
        ngram_size: usize,
        #[serde(default = "default_iters")]
        iters: usize,
    },
    External { embedding_file: PathBuf },
}

impl EmbedderKind {
    pub fn tfidf() -> Self {
        EmbedderKind::TfIdf { ngram_lo: 1, ngram_hi: 2, max_vocab: 20_000 }
    }

    pub fn toy_wordvec() -> Self {
        EmbedderKind::WordVecAvg { vector_file: None }
    }

    pub fn hashed() -> Self {
        EmbedderKind::HashedNgram { buckets: 512, add_length_features: true }
    }

    pub fn topic() -> Self {
        EmbedderKind::TopicFactorization { n_components: 30, ngram_size: 3, iters: 100 }
    }

    /// Short tag used in provenance and report headers.
    pub fn tag(&self) -> &'static str {
        match self {
            EmbedderKind::TfIdf { .. } => "tfidf",
            EmbedderKind::WordVecAvg { .. } => "wordvec",
            EmbedderKind::HashedNgram { .. } => "hashed",
            EmbedderKind::TopicFactorization { .. } => "topic",
            EmbedderKind::External { .. } => "external",
        }
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |m: &str| Err(EmbedError::InvalidConfig(m.to_string()));
        match *self {
            EmbedderKind::TfIdf { ngram_lo, ngram_hi, max_vocab } => {
                if ngram_lo == 0 || ngram_lo > ngram_hi {
                    return bad("tf-idf needs 1 <= ngram_lo <= ngram_hi");
                }
                if max_vocab == 0 {
                    return bad("tf-idf max_vocab must be positive");
                }
            }
            EmbedderKind::HashedNgram { buckets, .. } if buckets < 16 => return bad("hashed n-grams need buckets >= 16"),
            EmbedderKind::TopicFactorization { n_components, ngram_size, .. } => {
                if n_components == 0 || ngram_size == 0 {
                    return bad("topic factorization needs n_components >= 1 and ngram_size >= 1");
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Rewrites relative file paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            EmbedderKind::WordVecAvg { vector_file: Some(p) } => fix(p),
            EmbedderKind::External { embedding_file } => fix(embedding_file),
            _ => {}
        }
    }
}

/// Dense embedding of one text column.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBlock {
    pub source_column: String,
    pub dim: usize,
    pub matrix: Array2<f64>,
}

impl EmbeddingBlock {
    pub fn new(source_column: impl Into<String>, matrix: Array2<f64>) -> Self {
        EmbeddingBlock { source_column: source_column.into(), dim: matrix.ncols(), matrix }
    }
}

/// An embedder whose file-backed resources have been loaded and checked.
#[derive(Debug, Clone)]
pub struct Embedder {
    pub kind: EmbedderKind,
    vectors: Option<Arc<WordVecModel>>,
    external: Option<Arc<ExternalEmbeddings>>,
}

impl Embedder {
    /// Loads vector or embedding files. `table` is the full
    /// post-preprocessing table, used to verify external alignment.
    pub fn prepare(kind: &EmbedderKind, table: &Table) -> Result<Self, EmbedError> {
        kind.validate()?;
        let mut e = Embedder { kind: kind.clone(), vectors: None, external: None };
        match kind {
            EmbedderKind::WordVecAvg { vector_file: None } => e.vectors = Some(Arc::new(WordVecModel::toy())),
            EmbedderKind::WordVecAvg { vector_file: Some(p) } => e.vectors = Some(Arc::new(wordvec_avg_load(p)?)),
            EmbedderKind::External { embedding_file } => {
                let ext = load_external_embeddings(embedding_file, table.n_rows)?;
                ext.verify(table)?;
                e.external = Some(Arc::new(ext));
            }
            _ => {}
        }
        Ok(e)
    }

    /// For the stateless and bundled kinds only.
    pub fn without_resources(kind: &EmbedderKind) -> Result<Self, EmbedError> {
        if matches!(kind, EmbedderKind::External { .. } | EmbedderKind::WordVecAvg { vector_file: Some(_) }) {
            return Err(EmbedError::Unprepared);
        }
        kind.validate()?;
        let vectors = matches!(kind, EmbedderKind::WordVecAvg { .. }).then(|| Arc::new(WordVecModel::toy()));
        Ok(Embedder { kind: kind.clone(), vectors, external: None })
    }

    pub(crate) fn fit<S: AsRef<str>>(&self, train_texts: &[S], seed: u64) -> Result<FittedText, EmbedError> {
        Ok(match &self.kind {
            EmbedderKind::TfIdf { ngram_lo, ngram_hi, max_vocab } => {
                FittedText::TfIdf(tfidf_fit(train_texts, *ngram_lo, *ngram_hi, *max_vocab)?)
            }
            EmbedderKind::WordVecAvg { .. } => FittedText::WordVec(self.vectors.clone().ok_or(EmbedError::Unprepared)?),
            EmbedderKind::HashedNgram { buckets, add_length_features } => {
                FittedText::Hashed { buckets: *buckets, add_length_features: *add_length_features }
            }
            EmbedderKind::TopicFactorization { n_components, ngram_size, iters } => {
                FittedText::Topic(topic_fit(train_texts, *n_components, *ngram_size, *iters, seed)?)
            }
            EmbedderKind::External { .. } => FittedText::External(self.external.clone().ok_or(EmbedError::Unprepared)?),
        })
    }
}

/// A text transform fitted on training texts.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedText {
    TfIdf(TfIdfModel),
    WordVec(Arc<WordVecModel>),
    Hashed { buckets: usize, add_length_features: bool },
    Topic(TopicModel),
    External(Arc<ExternalEmbeddings>),
}

impl FittedText {
    pub fn transform<S: AsRef<str>>(&self, texts: &[S], source_column: &str) -> EmbeddingBlock {
        match self {
            FittedText::TfIdf(m) => tfidf_transform(m, texts, source_column),
            FittedText::WordVec(m) => wordvec_avg_transform(m, texts, source_column),
            FittedText::Hashed { buckets, add_length_features } => {
                hashed_ngram_transform(texts, *buckets, *add_length_features, source_column)
            }
            FittedText::Topic(m) => topic_transform(m, texts, source_column),
            FittedText::External(_) => unreachable!("external embeddings are indexed by row, not transformed"),
        }
    }
}
