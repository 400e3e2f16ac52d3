use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::tokenize::tokens;
use super::{EmbedError, EmbeddingBlock};

/// Small vector file bundled with the crate (used by tests and the break lab).
pub const TOY_VECTORS: &str = include_str!("../../data/toy_vectors.txt");

/// Token -> vector lookup in the plain-text `<count> <dim>` format.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVecModel {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl WordVecModel {
    pub fn toy() -> Self {
        Self::parse(TOY_VECTORS).expect("bundled vector file is well-formed")
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Parses the vector-file format. Tokens are lowercased; the first
    /// occurrence of a token wins.
    pub fn parse(text: &str) -> Result<Self, EmbedError> {
        let bad = |line: usize, message: &str| EmbedError::MalformedVectorFile { line, message: message.to_string() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let mut head = header.split_whitespace();
        let count: usize = head.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(1, "bad count"))?;
        let dim: usize = head.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(1, "bad dim"))?;
        if dim == 0 || head.next().is_some() {
            return Err(bad(1, "header must be '<count> <dim>' with dim > 0"));
        }
        let mut vectors = BTreeMap::new();
        let mut seen = 0;
        for (i, line) in lines {
            let line_no = i + 1;
            let mut parts = line.split_whitespace();
            let token = parts.next().ok_or_else(|| bad(line_no, "empty line"))?;
            let values: Vec<f64> = parts
                .map(|p| p.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<_>>()
                .ok_or_else(|| bad(line_no, "non-numeric component"))?;
            if values.len() != dim {
                return Err(bad(line_no, &format!("expected {dim} components, got {}", values.len())));
            }
            vectors.entry(token.to_lowercase()).or_insert(values);
            seen += 1;
        }
        if seen != count {
            return Err(bad(text.lines().count(), &format!("header announces {count} vectors, file has {seen}")));
        }
        Ok(WordVecModel { dim, vectors })
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let text = fs::read_to_string(path).map_err(|e| EmbedError::Io { path: path.to_path_buf(), source: e })?;
        Self::parse(&text)
    }
}

pub fn wordvec_avg_load(path: &Path) -> Result<WordVecModel, EmbedError> {
    WordVecModel::load(path)
}

/// Mean of in-vocabulary token vectors; all-OOV texts map to zero.
pub fn wordvec_avg_transform<S: AsRef<str>>(model: &WordVecModel, texts: &[S], source_column: &str) -> EmbeddingBlock {
    let mut matrix = Array2::zeros((texts.len(), model.dim));
    for (i, text) in texts.iter().enumerate() {
        let mut row = matrix.row_mut(i);
        let mut hits = 0usize;
        for tok in tokens(text.as_ref()) {
            if let Some(v) = model.get(&tok) {
                for (r, x) in row.iter_mut().zip(v) {
                    *r += x;
                }
                hits += 1;
            }
        }
        if hits > 0 {
            row.mapv_inplace(|v| v / hits as f64);
        }
    }
    EmbeddingBlock::new(source_column, matrix)
}
