//! Character n-gram topic factorization.
//!
//! The count matrix `V` (documents x n-grams, kept sparse) is factored as
//! `V ~ W H` with non-negative `W` (documents x topics) and `H`
//! (topics x n-grams) using multiplicative updates for the Frobenius loss:
//!
//! ```text
//! H <- H * (W^T V) / (W^T W H)
//! W <- W * (V H^T) / (W H H^T)
//! ```
//!
//! Inference on new documents keeps `H` fixed and iterates the `W` update.

use std::collections::{BTreeMap, HashMap};

use ndarray::{Array2, Axis};
use rand::Rng as _;

use super::tokenize::char_ngrams;
use super::{EmbedError, EmbeddingBlock};
use crate::rng::seeded;

const DENOM_EPS: f64 = 1e-12;
/// Largest n-gram vocabulary kept (most frequent first).
pub const MAX_TOPIC_VOCAB: usize = 10_000;

type SparseRows = Vec<Vec<(usize, f64)>>;

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub ngram_size: usize,
    pub iters: usize,
    pub vocabulary: BTreeMap<String, usize>,
    /// Topics x n-grams.
    pub h: Array2<f64>,
    /// Constant initial value for `W` entries during inference.
    pub w_init: f64,
}

impl TopicModel {
    pub fn n_components(&self) -> usize {
        self.h.nrows()
    }
}

/// Fitted model plus the Frobenius error after every iteration.
#[derive(Debug, Clone)]
pub struct TopicFit {
    pub model: TopicModel,
    pub w: Array2<f64>,
    pub errors: Vec<f64>,
}

fn count_rows<S: AsRef<str>>(texts: &[S], n: usize, vocab: &BTreeMap<String, usize>) -> SparseRows {
    texts
        .iter()
        .map(|t| {
            let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
            for g in char_ngrams(t.as_ref(), n) {
                if let Some(&j) = vocab.get(&g) {
                    *counts.entry(j).or_insert(0.0) += 1.0;
                }
            }
            counts.into_iter().collect()
        })
        .collect()
}

fn build_vocabulary<S: AsRef<str>>(texts: &[S], n: usize) -> BTreeMap<String, usize> {
    let mut df: HashMap<String, usize> = HashMap::new();
    for t in texts {
        let mut grams = char_ngrams(t.as_ref(), n);
        grams.sort();
        grams.dedup();
        for g in grams {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = df.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(MAX_TOPIC_VOCAB);
    ranked.sort_by(|a, b| a.0.cmp(&b.0));
    ranked.into_iter().enumerate().map(|(i, (g, _))| (g, i)).collect()
}

/// `V H^T` (documents x topics).
fn v_ht(v: &SparseRows, h: &Array2<f64>) -> Array2<f64> {
    let k = h.nrows();
    let mut out = Array2::zeros((v.len(), k));
    for (i, row) in v.iter().enumerate() {
        for &(t, x) in row {
            for c in 0..k {
                out[[i, c]] += x * h[[c, t]];
            }
        }
    }
    out
}

/// `W^T V` (topics x n-grams).
fn wt_v(w: &Array2<f64>, v: &SparseRows, m: usize) -> Array2<f64> {
    let k = w.ncols();
    let mut out = Array2::zeros((k, m));
    for (i, row) in v.iter().enumerate() {
        for &(t, x) in row {
            for c in 0..k {
                out[[c, t]] += w[[i, c]] * x;
            }
        }
    }
    out
}

fn update_w(w: &mut Array2<f64>, v: &SparseRows, h: &Array2<f64>, hht: &Array2<f64>) {
    let numer = v_ht(v, h);
    let denom = w.dot(hht);
    w.zip_mut_with(&(numer / (denom + DENOM_EPS)), |a, b| *a *= b);
}

fn update_h(h: &mut Array2<f64>, v: &SparseRows, w: &Array2<f64>) {
    let numer = wt_v(w, v, h.ncols());
    let denom = w.t().dot(w).dot(&*h);
    h.zip_mut_with(&(numer / (denom + DENOM_EPS)), |a, b| *a *= b);
}

/// `||V - W H||_F^2` without materializing `W H`.
pub(crate) fn frobenius_error(v: &SparseRows, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let mut v_sq = 0.0;
    let mut cross = 0.0;
    for (i, row) in v.iter().enumerate() {
        for &(t, x) in row {
            v_sq += x * x;
            cross += x * w.row(i).dot(&h.column(t));
        }
    }
    let wtw = w.t().dot(w);
    let hht = h.dot(&h.t());
    let quad = (&wtw * &hht).sum();
    (v_sq - 2.0 * cross + quad).max(0.0)
}

fn factorize(v: &SparseRows, m: usize, k: usize, iters: usize, seed: u64) -> (Array2<f64>, Array2<f64>, f64, Vec<f64>) {
    let n = v.len();
    let total: f64 = v.iter().flatten().map(|&(_, x)| x).sum();
    let mean = total / (n.max(1) * m.max(1)) as f64;
    let scale = (mean / k as f64).sqrt().max(1e-6);
    let mut rng = seeded(seed);
    let mut w = Array2::from_shape_simple_fn((n, k), || rng.random::<f64>() * scale + 1e-6);
    let mut h = Array2::from_shape_simple_fn((k, m), || rng.random::<f64>() * scale + 1e-6);
    let mut errors = Vec::with_capacity(iters);
    for _ in 0..iters {
        update_h(&mut h, v, &w);
        let hht = h.dot(&h.t());
        update_w(&mut w, v, &h, &hht);
        errors.push(frobenius_error(v, &w, &h));
    }
    (w, h, scale, errors)
}

/// Fits on training texts only; `V`'s vocabulary comes from this corpus.
pub fn topic_fit_with_history<S: AsRef<str>>(
    train_texts: &[S],
    n_components: usize,
    ngram_size: usize,
    iters: usize,
    seed: u64,
) -> Result<TopicFit, EmbedError> {
    let vocabulary = build_vocabulary(train_texts, ngram_size);
    if train_texts.is_empty() || vocabulary.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    let v = count_rows(train_texts, ngram_size, &vocabulary);
    let (w, h, w_init, errors) = factorize(&v, vocabulary.len(), n_components.max(1), iters, seed);
    Ok(TopicFit { model: TopicModel { ngram_size, iters, vocabulary, h, w_init }, w, errors })
}

pub fn topic_fit<S: AsRef<str>>(
    train_texts: &[S],
    n_components: usize,
    ngram_size: usize,
    iters: usize,
    seed: u64,
) -> Result<TopicModel, EmbedError> {
    topic_fit_with_history(train_texts, n_components, ngram_size, iters, seed).map(|f| f.model)
}

/// Solves for `W` on new texts with `H` frozen.
pub fn topic_transform<S: AsRef<str>>(model: &TopicModel, texts: &[S], source_column: &str) -> EmbeddingBlock {
    let v = count_rows(texts, model.ngram_size, &model.vocabulary);
    let k = model.n_components();
    let mut w = Array2::from_elem((texts.len(), k), model.w_init);
    let hht = model.h.dot(&model.h.t());
    for _ in 0..model.iters {
        update_w(&mut w, &v, &model.h, &hht);
    }
    for mut row in w.axis_iter_mut(Axis(0)) {
        row.mapv_inplace(|x| if x.is_finite() { x } else { 0.0 });
    }
    EmbeddingBlock::new(source_column, w)
}

/// Dense-input factorization, exposed for checking the update rule directly.
pub fn factorize_dense(v: &Array2<f64>, k: usize, iters: usize, seed: u64) -> TopicFit {
    let rows: SparseRows = v
        .rows()
        .into_iter()
        .map(|r| r.iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(j, &x)| (j, x)).collect())
        .collect();
    let (w, h, w_init, errors) = factorize(&rows, v.ncols(), k, iters, seed);
    TopicFit {
        model: TopicModel { ngram_size: 0, iters, vocabulary: BTreeMap::new(), h, w_init },
        w,
        errors,
    }
}
