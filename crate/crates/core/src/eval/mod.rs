//! Cross-validated with-text / without-text experiments and their reports.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embed::{assemble_with_pipeline, EmbedError, Embedder, EmbedderKind, Target};
use crate::ingest::{prepare, DatasetManifest, IngestError};
use crate::models::{fit_predict, ModelError, ModelKind, Predictions};
use crate::rng::derive;
use crate::select::{applicable, downsample, SelectError, SelectorKind, SelectorResult};
use crate::table::{k_fold_split, subsample_rows, FoldAssignment, Table, TableError};

mod metrics;
mod report;

pub use metrics::{mean_std, metric_accuracy, metric_r2};
pub use report::{emit_report, render_report, Outcome, Report, ReportEntry};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {truth} true values, {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("target is constant; R^2 is undefined")]
    ConstantTarget,
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("fold {fold}: {source}")]
    Fold { fold: usize, source: Box<EvalError> },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io error on {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}

fn default_k_folds() -> usize {
    5
}
fn default_feature_cap() -> usize {
    300
}
fn default_row_cap() -> usize {
    3000
}

/// One grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub manifest: DatasetManifest,
    pub embedder: EmbedderKind,
    #[serde(default)]
    pub selector: Option<SelectorKind>,
    pub model: ModelKind,
    pub with_text: bool,
    #[serde(default = "default_k_folds")]
    pub k_folds: usize,
    #[serde(default = "default_feature_cap")]
    pub feature_cap: usize,
    #[serde(default = "default_row_cap")]
    pub row_cap: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(manifest: DatasetManifest, embedder: EmbedderKind, model: ModelKind, with_text: bool, seed: u64) -> Self {
        ExperimentSpec {
            manifest,
            embedder,
            selector: None,
            model,
            with_text,
            k_folds: default_k_folds(),
            feature_cap: default_feature_cap(),
            row_cap: default_row_cap(),
            seed,
        }
    }

    pub fn selector_label(&self) -> String {
        self.selector.map_or_else(|| "none".to_string(), |s| s.to_string())
    }

    /// `dataset/model/embedder/selector/text|no-text`.
    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}/{}/{}",
            self.manifest.name,
            self.model.tag(),
            self.embedder.tag(),
            self.selector_label(),
            if self.with_text { "text" } else { "no-text" }
        )
    }

    /// Hex sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }

    pub fn is_applicable(&self) -> bool {
        self.selector.is_none_or(|s| applicable(s, self.manifest.task)) && self.model.supports(self.manifest.task)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.k_folds < 2 {
            return Err(EvalError::Invalid(format!("k_folds must be >= 2, got {}", self.k_folds)));
        }
        if self.feature_cap == 0 || self.row_cap == 0 {
            return Err(EvalError::Invalid("feature_cap and row_cap must be positive".into()));
        }
        if let Some(s) = self.selector {
            if !applicable(s, self.manifest.task) {
                return Err(SelectError::NotApplicable { kind: s, task: self.manifest.task.tag() }.into());
            }
        }
        if !self.model.supports(self.manifest.task) {
            return Err(ModelError::TaskMismatch { model: self.model.tag(), task: self.manifest.task.tag() }.into());
        }
        self.embedder.validate()?;
        self.model.validate()?;
        Ok(())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub spec: ExperimentSpec,
    pub per_fold: Vec<f64>,
    pub mean: f64,
    /// Population std over folds.
    pub std: f64,
    pub metric_name: &'static str,
    /// True when a selector actually reduced the width on some fold.
    pub selection_applied: bool,
    /// Per-fold digest of everything fitted on the training side.
    pub fold_fingerprints: Vec<String>,
}

/// What one fold produced.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub metric: f64,
    pub fingerprint: String,
    pub train_width: usize,
    pub test_width: usize,
    pub selection: Option<SelectorResult>,
}

pub fn metric_name(spec: &ExperimentSpec) -> &'static str {
    if spec.manifest.task.is_classification() {
        "accuracy"
    } else {
        "r2"
    }
}

fn score(target: &Target, preds: &Predictions) -> Result<f64, EvalError> {
    match (target, preds) {
        (Target::Classes { codes, labels }, Predictions::Classes { .. }) => {
            let truth: Vec<&str> = codes.iter().map(|&c| labels[c].as_str()).collect();
            let pred = preds.label_strings();
            let pred: Vec<&str> = pred.iter().map(String::as_str).collect();
            metric_accuracy(&truth, &pred)
        }
        (Target::Regression(y), Predictions::Values(p)) => metric_r2(y, p),
        _ => Err(EvalError::Invalid("prediction kind does not match the task".into())),
    }
}

/// Runs fold `test_fold` of an already subsampled and split table.
pub fn run_fold(
    table: &Table,
    embedder: &Embedder,
    folds: &FoldAssignment,
    test_fold: usize,
    spec: &ExperimentSpec,
) -> Result<FoldOutcome, EvalError> {
    let (train, test, pipeline) = assemble_with_pipeline(table, embedder, spec.with_text, folds, test_fold)?;
    let (train, test, selection) = match spec.selector {
        Some(kind) => downsample(&train, &test, kind, spec.feature_cap, derive(spec.seed, 100 + test_fold as u64))?,
        None => (train, test, None),
    };
    let raw = match spec.model {
        ModelKind::External { raw_table: true, .. } => {
            Some((table.take_rows(&folds.train_rows(test_fold)), table.take_rows(&folds.test_rows(test_fold))))
        }
        _ => None,
    };
    let (preds, model) = fit_predict(&spec.model, &train, &test, raw.as_ref().map(|(a, b)| (a, b)))?;
    let metric = score(&test.target, &preds)?;

    let mut h = Sha256::new();
    h.update(pipeline.fingerprint().as_bytes());
    if let Some(s) = &selection {
        h.update(format!("{:?}{:?}", s.selected, s.scores).as_bytes());
    }
    if let Some(m) = &model {
        h.update(m.fingerprint().as_bytes());
    }
    Ok(FoldOutcome {
        metric,
        fingerprint: hex(&h.finalize()),
        train_width: train.n_cols(),
        test_width: test.n_cols(),
        selection,
    })
}

/// Subsamples rows and assigns folds exactly as [`run_experiment`] does.
pub fn prepare_folds(table: &Table, spec: &ExperimentSpec) -> Result<(Table, FoldAssignment), EvalError> {
    let sub = subsample_rows(table, spec.row_cap, derive(spec.seed, 0));
    let folds = k_fold_split(&sub, spec.k_folds, derive(spec.seed, 1))?;
    Ok((sub, folds))
}

/// Runs a spec on a table that has already been ingested.
pub fn run_experiment_on(table: &Table, spec: &ExperimentSpec) -> Result<EvalResult, EvalError> {
    spec.validate()?;
    let embedder = Embedder::prepare(&spec.embedder, table)?;
    let (sub, folds) = prepare_folds(table, spec)?;
    let outcomes: Vec<FoldOutcome> = (0..spec.k_folds)
        .into_par_iter()
        .map(|f| run_fold(&sub, &embedder, &folds, f, spec).map_err(|e| EvalError::Fold { fold: f, source: Box::new(e) }))
        .collect::<Result<_, _>>()?;
    let per_fold: Vec<f64> = outcomes.iter().map(|o| o.metric).collect();
    let (mean, std) = mean_std(&per_fold);
    Ok(EvalResult {
        spec: spec.clone(),
        per_fold,
        mean,
        std,
        metric_name: metric_name(spec),
        selection_applied: outcomes.iter().any(|o| o.selection.is_some()),
        fold_fingerprints: outcomes.into_iter().map(|o| o.fingerprint).collect(),
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<EvalResult, EvalError> {
    spec.validate()?;
    let (table, _) = prepare(&spec.manifest)?;
    run_experiment_on(&table, spec)
}

/// Runs every spec on a pool of `jobs` workers. Each distinct manifest is
/// ingested once. Results keep the input order.
pub fn run_grid(specs: &[ExperimentSpec], jobs: usize) -> Vec<Result<EvalResult, EvalError>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
    pool.install(|| {
        let mut manifests: BTreeMap<String, &DatasetManifest> = BTreeMap::new();
        for s in specs {
            manifests.entry(serde_json::to_string(&s.manifest).expect("manifest serializes")).or_insert(&s.manifest);
        }
        let tables: BTreeMap<String, Result<Table, String>> = manifests
            .into_par_iter()
            .map(|(key, m)| (key, prepare(m).map(|(t, _)| t).map_err(|e| e.to_string())))
            .collect();
        specs
            .par_iter()
            .map(|spec| {
                spec.validate()?;
                let key = serde_json::to_string(&spec.manifest).expect("manifest serializes");
                match &tables[&key] {
                    Ok(t) => run_experiment_on(t, spec),
                    Err(e) => Err(EvalError::Invalid(format!("dataset {}: {e}", spec.manifest.name))),
                }
            })
            .collect()
    })
}
