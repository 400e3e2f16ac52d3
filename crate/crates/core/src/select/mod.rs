//! Feature downsampling strategies and their task applicability.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::embed::{FeatureMatrix, Provenance, Target};
use crate::models::ModelError;
use crate::rng::seeded;
use crate::table::TaskKind;

mod attribution;
mod lasso;
mod pca;
mod stats;

pub use attribution::LinearSurrogate;
pub use lasso::{
    l1_logistic_fit, l1_logistic_path_select, lambda_path, lasso_cd, lasso_lambda_max, lasso_path_select,
    soft_threshold, L1LogisticFit, LassoFit,
};
pub use pca::{pca_scores, principal_components};
pub use stats::{anova_scores, average_ranks, pearson, ttest_scores, variance_scores};

/// Number of non-text survivors is subtracted from the cap, but at least
/// this many text features are kept.
pub const MIN_TEXT_FEATURES: usize = 10;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("t-test needs exactly two classes with at least two samples each")]
    NotBinary,
    #[error("ANOVA needs at least two classes with at least two samples each")]
    DegenerateClasses,
    #[error("selector '{kind}' does not apply to {task} tasks")]
    NotApplicable { kind: SelectorKind, task: &'static str },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("selected index {index} is out of range for width {width}")]
    IndexOutOfRange { index: usize, width: usize },
    #[error("unknown selector '{0}'")]
    UnknownSelector(String),
    #[error("selector surrogate failed: {0}")]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SelectorKind {
    TTest,
    Anova,
    Variance,
    Pca,
    L1,
    Correlation(CorrelationMethod),
    ModelAttribution,
    Random,
}

impl SelectorKind {
    pub const ALL: [SelectorKind; 8] = [
        SelectorKind::TTest,
        SelectorKind::Anova,
        SelectorKind::L1,
        SelectorKind::Variance,
        SelectorKind::Pca,
        SelectorKind::Correlation(CorrelationMethod::Pearson),
        SelectorKind::ModelAttribution,
        SelectorKind::Random,
    ];

    /// Uses the target.
    pub fn supervised(self) -> bool {
        !matches!(self, SelectorKind::Variance | SelectorKind::Pca | SelectorKind::Random)
    }

    /// Needs no model fit.
    pub fn zero_shot(self) -> bool {
        !matches!(self, SelectorKind::L1 | SelectorKind::ModelAttribution)
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectorKind::TTest => "ttest",
            SelectorKind::Anova => "anova",
            SelectorKind::Variance => "variance",
            SelectorKind::Pca => "pca",
            SelectorKind::L1 => "l1",
            SelectorKind::Correlation(CorrelationMethod::Pearson) => "correlation",
            SelectorKind::Correlation(CorrelationMethod::Spearman) => "correlation:spearman",
            SelectorKind::ModelAttribution => "shap",
            SelectorKind::Random => "random",
        })
    }
}

impl FromStr for SelectorKind {
    type Err = SelectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "ttest" | "t-test" | "t_test" => SelectorKind::TTest,
            "anova" => SelectorKind::Anova,
            "variance" => SelectorKind::Variance,
            "pca" => SelectorKind::Pca,
            "l1" | "lasso" => SelectorKind::L1,
            "correlation" | "correlation:pearson" | "pearson" => SelectorKind::Correlation(CorrelationMethod::Pearson),
            "correlation:spearman" | "spearman" => SelectorKind::Correlation(CorrelationMethod::Spearman),
            "shap" | "model_attribution" | "attribution" => SelectorKind::ModelAttribution,
            "random" => SelectorKind::Random,
            other => return Err(SelectError::UnknownSelector(other.to_string())),
        })
    }
}

impl TryFrom<String> for SelectorKind {
    type Error = SelectError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SelectorKind> for String {
    fn from(k: SelectorKind) -> String {
        k.to_string()
    }
}

/// Which tasks each selector supports.
pub fn applicable(kind: SelectorKind, task: TaskKind) -> bool {
    use TaskKind::*;
    match kind {
        SelectorKind::TTest => task == BinaryClassification,
        SelectorKind::Anova => task != Regression,
        SelectorKind::Correlation(_) => task == Regression,
        SelectorKind::Variance | SelectorKind::Pca | SelectorKind::L1 | SelectorKind::ModelAttribution | SelectorKind::Random => true,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorResult {
    pub kind: SelectorKind,
    /// Higher means keep.
    pub scores: Vec<f64>,
    /// Ascending column indices.
    pub selected: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    /// False when an iterative fit hit its sweep limit; the last iterate is used.
    pub converged: bool,
}

/// Indices of the `k` largest scores, lower index first on ties, returned
/// in ascending order. NaN scores rank last.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| key(scores[b]).total_cmp(&key(scores[a])));
    idx.truncate(k.min(scores.len()));
    idx.sort_unstable();
    idx
}

fn task_of(target: &Target) -> TaskKind {
    match target {
        Target::Regression(_) => TaskKind::Regression,
        Target::Classes { labels, .. } if labels.len() <= 2 => TaskKind::BinaryClassification,
        Target::Classes { .. } => TaskKind::MulticlassClassification,
    }
}

/// Scores the columns of `x` and keeps the top `k`.
pub fn select(
    kind: SelectorKind,
    x: &ndarray::Array2<f64>,
    target: &Target,
    k: usize,
    seed: u64,
) -> Result<SelectorResult, SelectError> {
    if k == 0 {
        return Err(SelectError::InvalidK);
    }
    let task = task_of(target);
    if !applicable(kind, task) {
        return Err(SelectError::NotApplicable { kind, task: task.tag() });
    }
    let d = x.ncols();
    let mut converged = true;
    let scores = match (kind, target) {
        (SelectorKind::TTest, Target::Classes { codes, .. }) => ttest_scores(x, codes)?,
        (SelectorKind::Anova, Target::Classes { codes, .. }) => anova_scores(x, codes)?,
        (SelectorKind::Variance, _) => variance_scores(x),
        (SelectorKind::Pca, _) => pca_scores(x),
        (SelectorKind::L1, _) => {
            let (mean, std) = attribution::standardize_stats(x);
            let z = attribution::apply_standardize(x, &mean, &std);
            match target {
                Target::Regression(y) => {
                    let ybar = y.iter().sum::<f64>() / y.len().max(1) as f64;
                    let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();
                    let fit = lasso_path_select(&z, &yc, k.min(d));
                    converged = fit.converged;
                    fit.weights.iter().map(|w| w.abs()).collect()
                }
                Target::Classes { codes, labels } => {
                    let fit = l1_logistic_path_select(&z, codes, labels.len(), k.min(d));
                    converged = fit.converged;
                    (0..d).map(|j| fit.weights.column(j).iter().map(|w| w.abs()).sum()).collect()
                }
            }
        }
        (SelectorKind::Correlation(method), Target::Regression(y)) => {
            let yr = match method {
                CorrelationMethod::Pearson => y.clone(),
                CorrelationMethod::Spearman => average_ranks(y),
            };
            x.columns()
                .into_iter()
                .map(|c| {
                    let c = c.to_vec();
                    let c = match method {
                        CorrelationMethod::Pearson => c,
                        CorrelationMethod::Spearman => average_ranks(&c),
                    };
                    pearson(&c, &yr).abs()
                })
                .collect()
        }
        (SelectorKind::ModelAttribution, _) => LinearSurrogate::fit(x, target)?.scores(x),
        (SelectorKind::Random, _) => {
            let mut rng = seeded(seed);
            let mut s = vec![0.0; d];
            for i in sample(&mut rng, d, k.min(d)) {
                s[i] = 1.0;
            }
            s
        }
        _ => unreachable!("applicability checked above"),
    };
    let selected = top_k(&scores, k);
    Ok(SelectorResult { kind, scores, selected, k, seed, converged })
}

/// Keeps `result.selected` columns, in ascending order.
pub fn apply_selection(matrix: &FeatureMatrix, result: &SelectorResult) -> Result<FeatureMatrix, SelectError> {
    keep_columns(matrix, &result.selected)
}

fn keep_columns(matrix: &FeatureMatrix, cols: &[usize]) -> Result<FeatureMatrix, SelectError> {
    let width = matrix.n_cols();
    if let Some(&index) = cols.iter().find(|&&c| c >= width) {
        return Err(SelectError::IndexOutOfRange { index, width });
    }
    let mut cols = cols.to_vec();
    cols.sort_unstable();
    cols.dedup();
    Ok(FeatureMatrix {
        matrix: matrix.matrix.select(ndarray::Axis(1), &cols),
        provenance: cols.iter().map(|&c| matrix.provenance[c].clone()).collect(),
        target: matrix.target.clone(),
    })
}

/// Text features kept for a cap, given the number of non-text features.
pub fn default_k(cap: usize, n_non_text: usize) -> usize {
    cap.saturating_sub(n_non_text).max(MIN_TEXT_FEATURES)
}

/// Reduces the text-embedding columns when the matrix is wider than
/// `cap`. The selector sees only training rows; the chosen columns are
/// then applied to both sides. Narrow matrices pass through untouched.
pub fn downsample(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    kind: SelectorKind,
    cap: usize,
    seed: u64,
) -> Result<(FeatureMatrix, FeatureMatrix, Option<SelectorResult>), SelectError> {
    let text = train.text_columns();
    if train.n_cols() <= cap || text.is_empty() {
        return Ok((train.clone(), test.clone(), None));
    }
    let non_text: Vec<usize> = (0..train.n_cols()).filter(|j| !text.contains(j)).collect();
    let k = default_k(cap, non_text.len()).min(text.len());
    let sub = train.matrix.select(ndarray::Axis(1), &text);
    let result = select(kind, &sub, &train.target, k, seed)?;
    let mut keep = non_text;
    keep.extend(result.selected.iter().map(|&i| text[i]));
    Ok((keep_columns(train, &keep)?, keep_columns(test, &keep)?, Some(result)))
}

/// Key/value summary with the 20 best-scored features.
pub fn selection_report(result: &SelectorResult, provenance: &[Provenance]) -> serde_json::Value {
    let mut order: Vec<usize> = (0..result.scores.len()).collect();
    order.sort_by(|&a, &b| result.scores[b].total_cmp(&result.scores[a]).then(a.cmp(&b)));
    let top: Vec<_> = order
        .iter()
        .take(20)
        .map(|&i| {
            let p = provenance.get(i);
            json!({
                "index": i,
                "score": result.scores[i],
                "source_column": p.map(|p| p.source_column.clone()),
                "encoder": p.map(|p| p.encoder.clone()),
                "index_in_block": p.map(|p| p.index),
            })
        })
        .collect();
    json!({
        "kind": result.kind.to_string(),
        "k": result.k,
        "seed": result.seed,
        "converged": result.converged,
        "selected": result.selected,
        "top_features": top,
    })
}
