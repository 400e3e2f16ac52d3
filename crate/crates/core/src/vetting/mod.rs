//! Dataset-curation checks, directional schema coverage and the LLM
//! prompts behind them.

use std::collections::HashSet;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::embed::{Embedder, EmbedderKind, FeaturePipeline, Target};
use crate::eval::{mean_std, metric_accuracy, metric_r2};
use crate::ingest::DatasetManifest;
use crate::models::{fit_predict, ModelKind, Predictions};
use crate::rng::derive;
use crate::select::{apply_selection, select, CorrelationMethod, SelectorKind};
use crate::table::{k_fold_split, subsample_rows, ColumnRole, Table};

mod client;
mod coverage;
mod parse;
mod prompts;
mod templates;

pub use client::{fitness_key, match_key, HttpClient, LlmClient, ReplayClient, DEFAULT_API_KEY_ENV};
pub use coverage::{binarize, directional_coverage, CoverageMatrix, DEFAULT_THRESHOLD};
pub use parse::{extract_json_object, parse_fitness_response, parse_match_response, FitnessColor};
pub use prompts::{build_fitness_prompt, build_similarity_prompt, format_template, SchemaSample, SAMPLE_ROWS};
pub use templates::{FITNESS_TEMPLATE, SIMILARITY_TEMPLATE};

#[derive(Debug, Error)]
pub enum VetError {
    #[error("both schemas must have at least one column")]
    EmptySchema,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("no GREEN/YELLOW/RED verdict found")]
    NoVerdictFound,
    #[error("dataset {0:?} is not in the coverage matrix")]
    UnknownDataset(String),
    #[error("no canned response at {0}")]
    MissingFixture(PathBuf),
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("http error: {0}")]
    Http(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarPair {
    pub col_a: String,
    pub col_b: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureMatchReport {
    pub dataset_a: String,
    pub dataset_b: String,
    pub similar_pairs: Vec<SimilarPair>,
    pub dissimilar_a: Vec<String>,
    pub dissimilar_b: Vec<String>,
}

impl FeatureMatchReport {
    /// Keeps each column at most once per side: the first similar pair
    /// using a column wins, and matched columns leave the dissimilar lists.
    pub fn normalized(self) -> Self {
        let mut seen_a = HashSet::new();
        let mut seen_b = HashSet::new();
        let similar_pairs: Vec<SimilarPair> = self
            .similar_pairs
            .into_iter()
            .filter(|p| {
                let fresh = !seen_a.contains(&p.col_a) && !seen_b.contains(&p.col_b);
                if fresh {
                    seen_a.insert(p.col_a.clone());
                    seen_b.insert(p.col_b.clone());
                }
                fresh
            })
            .collect();
        let dedup = |cols: Vec<String>, seen: &mut HashSet<String>| -> Vec<String> {
            cols.into_iter().filter(|c| seen.insert(c.clone())).collect()
        };
        FeatureMatchReport {
            dissimilar_a: dedup(self.dissimilar_a, &mut seen_a),
            dissimilar_b: dedup(self.dissimilar_b, &mut seen_b),
            similar_pairs,
            ..self
        }
    }
}

/// Sends the similarity prompt for `a` vs `b` and parses the reply.
pub fn compare_pair(client: &dyn LlmClient, a: &Table, b: &Table) -> Result<FeatureMatchReport, VetError> {
    let prompt = build_similarity_prompt(&SchemaSample::from_table(a, SAMPLE_ROWS), &SchemaSample::from_table(b, SAMPLE_ROWS));
    let raw = client.complete(&match_key(&a.name, &b.name), &prompt)?;
    let mut report = parse_match_response(&raw)?;
    report.dataset_a = a.name.clone();
    report.dataset_b = b.name.clone();
    Ok(report)
}

pub fn assess_fitness(client: &dyn LlmClient, table: &Table) -> Result<(FitnessColor, String), VetError> {
    let prompt = build_fitness_prompt(&SchemaSample::from_table(table, SAMPLE_ROWS));
    parse_fitness_response(&client.complete(&fitness_key(&table.name), &prompt)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CurationRule {
    HasFreeText,
    DualSignalProxy,
    PredictiveTask,
    Accessible,
    DomainDiversity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurationCheck {
    pub rule: CurationRule,
    pub verdict: Verdict,
    pub heuristic: bool,
    pub detail: String,
}

impl CurationCheck {
    fn new(rule: CurationRule, verdict: Verdict, detail: impl Into<String>) -> Self {
        CurationCheck { rule, verdict, heuristic: rule == CurationRule::DualSignalProxy, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        let tag = if self.heuristic { " (heuristic, advisory)" } else { "" };
        let verdict = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Manual => "MANUAL",
        };
        format!("{:?}: {verdict}{tag} - {}", self.rule, self.detail)
    }
}

/// Rows and folds used by the single-column signal test.
pub const SIGNAL_ROWS: usize = 600;
pub const SIGNAL_FOLDS: usize = 3;
/// Margin over the constant baseline that counts as beating chance.
pub const SIGNAL_MARGIN: f64 = 0.02;

/// Cross-validated score of a small GBDT on one feature derived from
/// `column`, and of the constant baseline.
pub fn single_column_signal(table: &Table, column: &str, seed: u64) -> Option<(f64, f64)> {
    let keep: Vec<_> = table.columns.iter().filter(|c| c.name == column || c.name == table.target.column).cloned().collect();
    let sub = subsample_rows(&Table { columns: keep, ..table.clone() }, SIGNAL_ROWS, derive(seed, 40));
    let folds = k_fold_split(&sub, SIGNAL_FOLDS, derive(seed, 41)).ok()?;
    let embedder = Embedder::without_resources(&EmbedderKind::tfidf()).ok()?;
    let model = ModelKind::Gbdt { max_depth: 3, learning_rate: 0.3, n_rounds: 30 };
    let classification = sub.task().is_classification();
    let mut scores = Vec::new();
    let mut base = Vec::new();
    for f in 0..SIGNAL_FOLDS {
        let train = sub.take_rows(&folds.train_rows(f));
        let test = sub.take_rows(&folds.test_rows(f));
        let p = FeaturePipeline::fit(&train, &embedder, true, derive(seed, 42 + f as u64)).ok()?;
        let (mut tr, mut te) = (p.transform(&train).ok()?, p.transform(&test).ok()?);
        if tr.n_cols() == 0 {
            return None;
        }
        if tr.n_cols() > 1 {
            let kind = if classification { SelectorKind::Anova } else { SelectorKind::Correlation(CorrelationMethod::Pearson) };
            let r = select(kind, &tr.matrix, &tr.target, 1, seed).ok()?;
            tr = apply_selection(&tr, &r).ok()?;
            te = apply_selection(&te, &r).ok()?;
        }
        let metric = |preds: &Predictions| -> Option<f64> {
            match (&te.target, preds) {
                (Target::Classes { codes, labels }, Predictions::Classes { .. }) => {
                    let truth: Vec<String> = codes.iter().map(|&c| labels[c].clone()).collect();
                    metric_accuracy(&truth, &preds.label_strings()).ok()
                }
                (Target::Regression(y), Predictions::Values(v)) => metric_r2(y, v).ok(),
                _ => None,
            }
        };
        scores.push(metric(&fit_predict(&model, &tr, &te, None).ok()?.0)?);
        base.push(metric(&fit_predict(&ModelKind::Constant, &tr, &te, None).ok()?.0)?);
    }
    Some((mean_std(&scores).0, mean_std(&base).0))
}

fn dual_signal(table: &Table, seed: u64) -> CurationCheck {
    let cols: Vec<(String, bool)> =
        table.feature_columns().map(|c| (c.name.clone(), c.role == Some(ColumnRole::Textual))).collect();
    let results: Vec<(String, bool, Option<(f64, f64)>)> = cols
        .par_iter()
        .map(|(n, text)| (n.clone(), *text, single_column_signal(table, n, seed)))
        .collect();
    let best = |want_text: bool| {
        results
            .iter()
            .filter(|(_, t, _)| *t == want_text)
            .filter_map(|(n, _, s)| s.map(|(m, b)| (n.clone(), m - b)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    };
    let describe = |b: &Option<(String, f64)>| b.as_ref().map_or_else(|| "none".to_string(), |(n, g)| format!("{n} ({g:+.3})"));
    let (bt, bn) = (best(true), best(false));
    let ok = |b: &Option<(String, f64)>| b.as_ref().is_some_and(|(_, g)| *g >= SIGNAL_MARGIN);
    let verdict = if ok(&bt) && ok(&bn) { Verdict::Pass } else { Verdict::Fail };
    CurationCheck::new(
        CurationRule::DualSignalProxy,
        verdict,
        format!("best text column {}, best non-text column {} over the constant baseline", describe(&bt), describe(&bn)),
    )
}

/// All five rules for one ingested dataset.
pub fn curation_checks(manifest: &DatasetManifest, table: &Table, seed: u64) -> Vec<CurationCheck> {
    let n_text = table.feature_columns().filter(|c| c.role == Some(ColumnRole::Textual)).count();
    let free_text = CurationCheck::new(
        CurationRule::HasFreeText,
        if n_text > 0 { Verdict::Pass } else { Verdict::Fail },
        format!("{n_text} textual column(s) after classification"),
    );
    let native = table.target_column().is_some() && !manifest.column_rules.contains_key(&manifest.target_column);
    let task = CurationCheck::new(
        CurationRule::PredictiveTask,
        if native { Verdict::Pass } else { Verdict::Fail },
        if native {
            format!("{} target {:?} read directly from the source table", manifest.task.tag(), manifest.target_column)
        } else {
            format!("target {:?} is missing or rewritten by a column rule", manifest.target_column)
        },
    );
    vec![
        free_text,
        dual_signal(table, seed),
        task,
        CurationCheck::new(CurationRule::Accessible, Verdict::Manual, "confirm the source is public and its license allows redistribution"),
        CurationCheck::new(CurationRule::DomainDiversity, Verdict::Manual, "judge against the other datasets in the benchmark"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_keeps_columns_once_per_side() {
        let pair = |a: &str, b: &str| SimilarPair { col_a: a.into(), col_b: b.into(), reason: String::new() };
        let r = FeatureMatchReport {
            dataset_a: "a".into(),
            dataset_b: "b".into(),
            similar_pairs: vec![pair("x", "y"), pair("x", "z"), pair("w", "v")],
            dissimilar_a: vec!["x".into(), "q".into(), "q".into()],
            dissimilar_b: vec!["z".into()],
        }
        .normalized();
        assert_eq!(r.similar_pairs.len(), 2);
        assert_eq!(r.dissimilar_a, vec!["q"]);
        assert_eq!(r.dissimilar_b, vec!["z"]);
    }
}
