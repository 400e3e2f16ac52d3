use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::{Array2, Axis};
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{EmbedError, Embedder, EmbedderKind, FittedText};
use crate::table::{Cell, ColumnRole, FoldAssignment, Table, TaskKind};

/// Where a feature column came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Provenance {
    pub source_column: String,
    /// "num", "ord", or an embedder tag.
    pub encoder: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Regression(Vec<f64>),
    /// `codes[i]` indexes into `labels`.
    Classes { codes: Vec<usize>, labels: Vec<String> },
}

impl Target {
    pub fn len(&self) -> usize {
        match self {
            Target::Regression(v) => v.len(),
            Target::Classes { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Target::Regression(_) => 0,
            Target::Classes { labels, .. } => labels.len(),
        }
    }

    pub fn subset(&self, rows: &[usize]) -> Target {
        match self {
            Target::Regression(v) => Target::Regression(rows.iter().map(|&r| v[r]).collect()),
            Target::Classes { codes, labels } => {
                Target::Classes { codes: rows.iter().map(|&r| codes[r]).collect(), labels: labels.clone() }
            }
        }
    }

    /// Numeric view: values for regression, codes as floats otherwise.
    pub fn as_f64(&self) -> Vec<f64> {
        match self {
            Target::Regression(v) => v.clone(),
            Target::Classes { codes, .. } => codes.iter().map(|&c| c as f64).collect(),
        }
    }

    /// Builds the target of `table`, coding labels against `labels`.
    /// Labels missing from `labels` are appended after the known ones.
    fn from_table(table: &Table, labels: Option<&[String]>) -> Result<Target, EmbedError> {
        if table.task() == TaskKind::Regression {
            return Ok(Target::Regression(table.target_values()?));
        }
        let mut known: Vec<String> = match labels {
            Some(l) => l.to_vec(),
            None => table.label_set()?,
        };
        let mut codes = Vec::with_capacity(table.n_rows);
        for label in table.target_labels()? {
            let code = match known.iter().position(|k| *k == label) {
                Some(c) => c,
                None => {
                    known.push(label);
                    known.len() - 1
                }
            };
            codes.push(code);
        }
        Ok(Target::Classes { codes, labels: known })
    }
}

/// Dense model input with one provenance entry per column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub matrix: Array2<f64>,
    pub provenance: Vec<Provenance>,
    pub target: Target,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Column indices whose encoder is a text embedder.
    pub fn text_columns(&self) -> Vec<usize> {
        (0..self.n_cols())
            .filter(|&j| !matches!(self.provenance[j].encoder.as_str(), "num" | "ord"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericStats {
    pub median: f64,
    pub mean: f64,
    pub std: f64,
}

pub type CategoryCodes = Vec<String>;

/// Everything learned from the training rows during assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePipeline {
    pub with_text: bool,
    pub embedder: String,
    /// Columns in output order.
    pub columns: Vec<(String, ColumnRole)>,
    /// `None` marks a dropped zero-variance column.
    pub numeric: BTreeMap<String, Option<NumericStats>>,
    pub categorical: BTreeMap<String, CategoryCodes>,
    pub text: BTreeMap<String, FittedText>,
    pub labels: Option<Vec<String>>,
}

/// Cell strings of a text column; missing cells become "".
pub fn text_values(table: &Table, column: &str) -> Vec<String> {
    table
        .column(column)
        .map(|c| c.values.iter().map(|v| v.as_label().unwrap_or_default()).collect())
        .unwrap_or_default()
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn numeric_cells(values: &[Cell]) -> impl Iterator<Item = Option<f64>> + '_ {
    values.iter().map(Cell::as_f64)
}

impl FeaturePipeline {
    /// Fits imputation, scaling, category codes and text models on `train`.
    pub fn fit(train: &Table, embedder: &Embedder, with_text: bool, seed: u64) -> Result<Self, EmbedError> {
        let mut p = FeaturePipeline {
            with_text,
            embedder: embedder.kind.tag().to_string(),
            columns: Vec::new(),
            numeric: BTreeMap::new(),
            categorical: BTreeMap::new(),
            text: BTreeMap::new(),
            labels: if train.task().is_classification() { Some(train.label_set()?) } else { None },
        };
        let mut external_done = false;
        for col in train.feature_columns() {
            let role = col.role.ok_or_else(|| crate::table::TableError::UnassignedRole(col.name.clone()))?;
            match role {
                ColumnRole::Numerical => {
                    let mut present: Vec<f64> = numeric_cells(&col.values).flatten().collect();
                    let med = median(&mut present);
                    let filled: Vec<f64> = numeric_cells(&col.values).map(|v| v.unwrap_or(med)).collect();
                    let n = filled.len().max(1) as f64;
                    let mean = filled.iter().sum::<f64>() / n;
                    let std = (filled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                    let keep = std.is_finite() && std > 1e-12 * mean.abs().max(1.0);
                    p.numeric.insert(col.name.clone(), keep.then_some(NumericStats { median: med, mean, std }));
                }
                ColumnRole::Categorical => {
                    let mut cats: Vec<String> = col.values.iter().filter_map(Cell::as_label).collect();
                    cats.sort();
                    cats.dedup();
                    p.categorical.insert(col.name.clone(), cats);
                }
                ColumnRole::Textual => {
                    if !with_text {
                        continue;
                    }
                    if let EmbedderKind::External { .. } = embedder.kind {
                        if external_done {
                            continue;
                        }
                        external_done = true;
                    }
                    let texts = text_values(train, &col.name);
                    p.text.insert(col.name.clone(), embedder.fit(&texts, seed)?);
                }
            }
            p.columns.push((col.name.clone(), role));
        }
        Ok(p)
    }

    /// Applies the fitted transforms to `table` (train or test rows).
    pub fn transform(&self, table: &Table) -> Result<FeatureMatrix, EmbedError> {
        let n = table.n_rows;
        let mut blocks: Vec<Array2<f64>> = Vec::new();
        let mut provenance = Vec::new();
        for (name, role) in &self.columns {
            let col = table.column(name).ok_or_else(|| crate::table::TableError::MissingTarget(name.clone()))?;
            match role {
                ColumnRole::Numerical => {
                    let Some(stats) = self.numeric[name] else { continue };
                    let v = numeric_cells(&col.values).map(|x| (x.unwrap_or(stats.median) - stats.mean) / stats.std);
                    blocks.push(Array2::from_shape_vec((n, 1), v.collect()).expect("one value per row"));
                    provenance.push(Provenance { source_column: name.clone(), encoder: "num".into(), index: 0 });
                }
                ColumnRole::Categorical => {
                    let cats = &self.categorical[name];
                    let v = col.values.iter().map(|c| match c.as_label() {
                        Some(l) => cats.binary_search(&l).map_or(-1.0, |i| i as f64),
                        None => -1.0,
                    });
                    blocks.push(Array2::from_shape_vec((n, 1), v.collect()).expect("one value per row"));
                    provenance.push(Provenance { source_column: name.clone(), encoder: "ord".into(), index: 0 });
                }
                ColumnRole::Textual => {
                    let fitted = &self.text[name];
                    let block = match fitted {
                        FittedText::External(ext) => ext.block_for(&table.row_ids, name)?,
                        _ => fitted.transform(&text_values(table, name), name),
                    };
                    provenance.extend((0..block.dim).map(|i| Provenance {
                        source_column: name.clone(),
                        encoder: self.embedder.clone(),
                        index: i,
                    }));
                    blocks.push(block.matrix);
                }
            }
        }
        let matrix = if blocks.is_empty() {
            Array2::zeros((n, 0))
        } else {
            let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
            ndarray::concatenate(Axis(1), &views).expect("blocks share the row count")
        };
        let target = Target::from_table(table, self.labels.as_deref())?;
        Ok(FeatureMatrix { matrix, provenance, target })
    }

    /// Stable digest of the fitted state.
    pub fn fingerprint(&self) -> String {
        let mut s = format!("{}|{}|{:?}|{:?}|{:?}|{:?}", self.with_text, self.embedder, self.columns, self.numeric, self.categorical, self.labels);
        for (name, fitted) in &self.text {
            match fitted {
                FittedText::WordVec(m) => write!(s, "|{name}:wordvec:{}:{}", m.dim, m.len()),
                FittedText::External(e) => write!(s, "|{name}:external:{}", e.checksum),
                other => write!(s, "|{name}:{other:?}"),
            }
            .expect("writing to a String");
        }
        let digest = Sha256::digest(s.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Assembles train and test matrices for one fold, returning the fitted
/// pipeline as well.
pub fn assemble_with_pipeline(
    table: &Table,
    embedder: &Embedder,
    with_text: bool,
    fold: &FoldAssignment,
    test_fold: usize,
) -> Result<(FeatureMatrix, FeatureMatrix, FeaturePipeline), EmbedError> {
    let train = table.take_rows(&fold.train_rows(test_fold));
    let test = table.take_rows(&fold.test_rows(test_fold));
    let pipeline = FeaturePipeline::fit(&train, embedder, with_text, crate::rng::derive(fold.seed, test_fold as u64))?;
    let tr = pipeline.transform(&train)?;
    let te = pipeline.transform(&test)?;
    Ok((tr, te, pipeline))
}

pub fn assemble_features(
    table: &Table,
    embedder: &Embedder,
    with_text: bool,
    fold: &FoldAssignment,
    test_fold: usize,
) -> Result<(FeatureMatrix, FeatureMatrix), EmbedError> {
    assemble_with_pipeline(table, embedder, with_text, fold, test_fold).map(|(a, b, _)| (a, b))
}
