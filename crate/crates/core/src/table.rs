//! In-memory table representation, task typing and seeded splitting.
//!
//! A [`Table`] is column-major. Every cell is either a number, a string or
//! [`Cell::Missing`]; missingness is never encoded as a sentinel value.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::seeded;

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("need at least k={k} rows (and k >= 2), table has {n_rows}")]
    TooFewRows { n_rows: usize, k: usize },
    #[error("class {label:?} has {count} rows, fewer than k={k}")]
    ClassTooSmall { label: String, count: usize, k: usize },
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("target column {0:?} not found")]
    MissingTarget(String),
    #[error("column {0:?} has no role assigned")]
    UnassignedRole(String),
    #[error("column {name:?} has {got} values, expected {expected}")]
    RaggedColumn { name: String, got: usize, expected: usize },
    #[error("row {0} has a missing target")]
    MissingTargetValue(usize),
    #[error("numerical column {0:?} contains non-numeric cells")]
    NonNumeric(String),
    #[error("{task} target needs {expected} distinct labels, found {found}")]
    LabelCount { task: TaskKind, expected: &'static str, found: usize },
    #[error("invalid test fraction {0}")]
    InvalidFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Numerical,
    Categorical,
    Textual,
}

impl fmt::Display for ColumnRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnRole::Numerical => "numerical",
            ColumnRole::Categorical => "categorical",
            ColumnRole::Textual => "textual",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "regression", alias = "reg")]
    Regression,
    #[serde(rename = "binary", alias = "b-clf", alias = "binary_classification")]
    BinaryClassification,
    #[serde(rename = "multiclass", alias = "m-clf", alias = "multiclass_classification")]
    MulticlassClassification,
}

impl TaskKind {
    pub fn is_classification(self) -> bool {
        !matches!(self, TaskKind::Regression)
    }

    /// Short tag used in reports (`reg`, `b-clf`, `m-clf`).
    pub fn tag(self) -> &'static str {
        match self {
            TaskKind::Regression => "reg",
            TaskKind::BinaryClassification => "b-clf",
            TaskKind::MulticlassClassification => "m-clf",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Regression => "regression",
            TaskKind::BinaryClassification => "binary",
            TaskKind::MulticlassClassification => "multiclass",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Missing,
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// String form of a non-missing cell, used for labels and categories.
    pub fn as_label(&self) -> Option<String> {
        match self {
            Cell::Missing => None,
            Cell::Num(v) => Some(format_number(*v)),
            Cell::Text(s) => Some(s.clone()),
        }
    }

    pub(crate) fn key(&self) -> CellKey {
        match self {
            Cell::Missing => CellKey::Missing,
            Cell::Num(v) => CellKey::Num(v.to_bits()),
            Cell::Text(s) => CellKey::Text(s.clone()),
        }
    }
}

/// Hashable identity of a cell (numbers compared bitwise).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum CellKey {
    Missing,
    Num(u64),
    Text(String),
}

pub(crate) fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    /// `None` until the column has been classified.
    pub role: Option<ColumnRole>,
    pub values: Vec<Cell>,
}

impl Column {
    pub fn new(name: impl Into<String>, role: Option<ColumnRole>, values: Vec<Cell>) -> Self {
        Column { name: name.into(), role, values }
    }

    pub fn numerical(name: impl Into<String>, values: impl IntoIterator<Item = f64>) -> Self {
        Column::new(name, Some(ColumnRole::Numerical), values.into_iter().map(Cell::Num).collect())
    }

    pub fn text<S: Into<String>>(
        name: impl Into<String>,
        role: ColumnRole,
        values: impl IntoIterator<Item = S>,
    ) -> Self {
        Column::new(name, Some(role), values.into_iter().map(|s| Cell::Text(s.into())).collect())
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|c| c.is_missing()).count()
    }

    pub fn unique_non_missing(&self) -> usize {
        self.values
            .iter()
            .filter(|c| !c.is_missing())
            .map(Cell::key)
            .collect::<HashSet<_>>()
            .len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub column: String,
    pub task: TaskKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub n_rows: usize,
    pub target: TargetSpec,
    /// Row positions in the post-preprocessing table; subsampling keeps
    /// these so external artefacts can be aligned by row.
    pub row_ids: Vec<usize>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<Column>, target: TargetSpec) -> Self {
        let n_rows = columns.first().map_or(0, |c| c.values.len());
        Table { name: name.into(), columns, n_rows, target, row_ids: (0..n_rows).collect() }
    }

    pub fn task(&self) -> TaskKind {
        self.target.task
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn target_column(&self) -> Option<&Column> {
        self.column(&self.target.column)
    }

    /// All non-target columns, in table order.
    pub fn feature_columns(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(move |c| c.name != self.target.column)
    }

    pub fn role_counts(&self) -> BTreeMap<ColumnRole, usize> {
        let mut counts = BTreeMap::new();
        for c in self.feature_columns() {
            if let Some(r) = c.role {
                *counts.entry(r).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Resets `row_ids` to `0..n_rows`.
    pub fn reindexed(mut self) -> Self {
        self.row_ids = (0..self.n_rows).collect();
        self
    }

    /// Keeps the given rows (in the given order).
    pub fn take_rows(&self, rows: &[usize]) -> Table {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                role: c.role,
                values: rows.iter().map(|&r| c.values[r].clone()).collect(),
            })
            .collect();
        Table {
            name: self.name.clone(),
            columns,
            n_rows: rows.len(),
            target: self.target.clone(),
            row_ids: rows.iter().map(|&r| self.row_ids[r]).collect(),
        }
    }

    /// Target label string per row (classification) or its display form.
    pub fn target_labels(&self) -> Result<Vec<String>, TableError> {
        let col = self
            .target_column()
            .ok_or_else(|| TableError::MissingTarget(self.target.column.clone()))?;
        col.values
            .iter()
            .enumerate()
            .map(|(i, c)| c.as_label().ok_or(TableError::MissingTargetValue(i)))
            .collect()
    }

    /// Sorted distinct target labels.
    pub fn label_set(&self) -> Result<Vec<String>, TableError> {
        let mut labels = self.target_labels()?;
        labels.sort();
        labels.dedup();
        Ok(labels)
    }

    /// Target class code per row, codes index into [`Table::label_set`].
    pub fn target_codes(&self) -> Result<(Vec<usize>, Vec<String>), TableError> {
        let labels = self.target_labels()?;
        let set = self.label_set()?;
        let codes = labels
            .iter()
            .map(|l| set.binary_search(l).expect("label in its own set"))
            .collect();
        Ok((codes, set))
    }

    /// Regression target values.
    pub fn target_values(&self) -> Result<Vec<f64>, TableError> {
        let col = self
            .target_column()
            .ok_or_else(|| TableError::MissingTarget(self.target.column.clone()))?;
        col.values
            .iter()
            .enumerate()
            .map(|(i, c)| match c {
                Cell::Num(v) => Ok(*v),
                Cell::Missing => Err(TableError::MissingTargetValue(i)),
                Cell::Text(_) => Err(TableError::NonNumeric(col.name.clone())),
            })
            .collect()
    }

    /// Checks the invariants of a validated table.
    pub fn validate(&self) -> Result<(), TableError> {
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(TableError::DuplicateColumn(c.name.clone()));
            }
            if c.values.len() != self.n_rows {
                return Err(TableError::RaggedColumn {
                    name: c.name.clone(),
                    got: c.values.len(),
                    expected: self.n_rows,
                });
            }
            let role = c.role.ok_or_else(|| TableError::UnassignedRole(c.name.clone()))?;
            if role == ColumnRole::Numerical && c.values.iter().any(|v| matches!(v, Cell::Text(_))) {
                return Err(TableError::NonNumeric(c.name.clone()));
            }
        }
        let target = self
            .target_column()
            .ok_or_else(|| TableError::MissingTarget(self.target.column.clone()))?;
        if let Some(i) = target.values.iter().position(Cell::is_missing) {
            return Err(TableError::MissingTargetValue(i));
        }
        match self.task() {
            TaskKind::Regression => {
                self.target_values()?;
            }
            TaskKind::BinaryClassification => {
                let found = self.label_set()?.len();
                if found != 2 {
                    return Err(TableError::LabelCount { task: self.task(), expected: "exactly 2", found });
                }
            }
            TaskKind::MulticlassClassification => {
                let found = self.label_set()?.len();
                if found < 3 {
                    return Err(TableError::LabelCount { task: self.task(), expected: "at least 3", found });
                }
            }
        }
        Ok(())
    }
}

/// Row-to-fold mapping produced by [`k_fold_split`] or [`train_test_split`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of_row: Vec<usize>,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of_row.len()).filter(|&r| self.fold_of_row[r] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of_row.len()).filter(|&r| self.fold_of_row[r] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of_row {
            sizes[f] += 1;
        }
        sizes
    }
}

fn rows_by_class(table: &Table) -> Result<BTreeMap<String, Vec<usize>>, TableError> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, l) in table.target_labels()?.into_iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    Ok(groups)
}

/// K-fold assignment: stratified for classification, shuffled for regression.
pub fn k_fold_split(table: &Table, k: usize, seed: u64) -> Result<FoldAssignment, TableError> {
    let n = table.n_rows;
    if k < 2 || n < k {
        return Err(TableError::TooFewRows { n_rows: n, k });
    }
    let mut rng = seeded(seed);
    let mut fold_of_row = vec![0; n];
    if table.task().is_classification() {
        let groups = rows_by_class(table)?;
        if let Some((label, rows)) = groups.iter().find(|(_, rows)| rows.len() < k) {
            return Err(TableError::ClassTooSmall { label: label.clone(), count: rows.len(), k });
        }
        // Round-robin continues across classes so fold totals stay balanced too.
        let mut next = 0usize;
        for rows in groups.into_values() {
            let mut rows = rows;
            rows.shuffle(&mut rng);
            for r in rows {
                fold_of_row[r] = next % k;
                next += 1;
            }
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for (pos, r) in order.into_iter().enumerate() {
            fold_of_row[r] = pos % k;
        }
    }
    Ok(FoldAssignment { k, fold_of_row, seed })
}

/// Single holdout split as a two-fold assignment; fold 1 is the test side.
pub fn train_test_split(table: &Table, test_fraction: f64, seed: u64) -> Result<FoldAssignment, TableError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(TableError::InvalidFraction(test_fraction));
    }
    let n = table.n_rows;
    if n < 2 {
        return Err(TableError::TooFewRows { n_rows: n, k: 2 });
    }
    let mut rng = seeded(seed);
    let mut fold_of_row = vec![0; n];
    let groups: Vec<Vec<usize>> = if table.task().is_classification() {
        rows_by_class(table)?.into_values().collect()
    } else {
        vec![(0..n).collect()]
    };
    for mut rows in groups {
        rows.shuffle(&mut rng);
        let n_test = ((rows.len() as f64) * test_fraction).round() as usize;
        let n_test = n_test.min(rows.len().saturating_sub(1));
        for &r in &rows[..n_test] {
            fold_of_row[r] = 1;
        }
    }
    Ok(FoldAssignment { k: 2, fold_of_row, seed })
}

/// Largest-remainder apportionment of `cap` over groups of the given sizes.
fn apportion(sizes: &[usize], cap: usize) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let exact: Vec<f64> = sizes.iter().map(|&s| s as f64 * cap as f64 / total as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut remaining = cap - quota.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &g in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        if quota[g] < sizes[g] {
            quota[g] += 1;
            remaining -= 1;
        }
    }
    quota
}

/// Seeded subsample of at most `cap` rows, stratified for classification.
///
/// Kept rows stay in their original order. Tables with `n_rows <= cap`
/// come back unchanged.
pub fn subsample_rows(table: &Table, cap: usize, seed: u64) -> Table {
    let cap = cap.max(1);
    if table.n_rows <= cap {
        return table.clone();
    }
    let mut rng = seeded(seed);
    let mut keep: Vec<usize> = match (table.task().is_classification(), rows_by_class(table)) {
        (true, Ok(groups)) => {
            let groups: Vec<Vec<usize>> = groups.into_values().collect();
            let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
            let quota = apportion(&sizes, cap);
            groups
                .iter()
                .zip(quota)
                .flat_map(|(rows, q)| {
                    index::sample(&mut rng, rows.len(), q).into_iter().map(|i| rows[i]).collect::<Vec<_>>()
                })
                .collect()
        }
        _ => index::sample(&mut rng, table.n_rows, cap).into_vec(),
    };
    keep.sort_unstable();
    table.take_rows(&keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regression_table(n: usize) -> Table {
        Table::new(
            "reg",
            vec![Column::numerical("x", (0..n).map(|i| i as f64)), Column::numerical("y", (0..n).map(|i| 2.0 * i as f64))],
            TargetSpec { column: "y".into(), task: TaskKind::Regression },
        )
    }

    fn binary_table(pos: usize, neg: usize) -> Table {
        let labels: Vec<&str> = std::iter::repeat_n("pos", pos).chain(std::iter::repeat_n("neg", neg)).collect();
        Table::new(
            "bin",
            vec![
                Column::numerical("x", (0..pos + neg).map(|i| i as f64)),
                Column::text("label", ColumnRole::Categorical, labels),
            ],
            TargetSpec { column: "label".into(), task: TaskKind::BinaryClassification },
        )
    }

    #[test]
    fn regression_folds_are_equal_sized() {
        let folds = k_fold_split(&regression_table(10), 5, 3).unwrap();
        assert_eq!(folds.fold_sizes(), vec![2; 5]);
    }

    #[test]
    fn binary_folds_are_stratified() {
        let t = binary_table(50, 50);
        let folds = k_fold_split(&t, 5, 11).unwrap();
        let labels = t.target_labels().unwrap();
        for f in 0..5 {
            let rows = folds.test_rows(f);
            let pos = rows.iter().filter(|&&r| labels[r] == "pos").count();
            assert_eq!(pos, 10);
            assert_eq!(rows.len() - pos, 10);
        }
    }

    #[test]
    fn folds_are_deterministic() {
        let t = binary_table(30, 20);
        assert_eq!(k_fold_split(&t, 5, 7).unwrap(), k_fold_split(&t, 5, 7).unwrap());
        assert_ne!(k_fold_split(&t, 5, 7).unwrap(), k_fold_split(&t, 5, 8).unwrap());
    }

    #[test]
    fn split_errors() {
        assert_eq!(
            k_fold_split(&regression_table(3), 5, 0),
            Err(TableError::TooFewRows { n_rows: 3, k: 5 })
        );
        assert!(matches!(
            k_fold_split(&binary_table(20, 3), 5, 0),
            Err(TableError::ClassTooSmall { count: 3, .. })
        ));
    }

    #[test]
    fn subsample_under_cap_is_identity() {
        let t = regression_table(2914);
        assert_eq!(subsample_rows(&t, 3000, 1), t);
    }

    #[test]
    fn subsample_hits_cap_and_keeps_order() {
        let t = regression_table(100_000);
        let s = subsample_rows(&t, 3000, 1);
        assert_eq!(s.n_rows, 3000);
        assert!(s.row_ids.windows(2).all(|w| w[0] < w[1]));
        let xs = s.column("x").unwrap().values.iter().map(|c| c.as_f64().unwrap() as usize).collect::<Vec<_>>();
        assert_eq!(xs, s.row_ids);
    }

    #[test]
    fn stratified_subsample_keeps_ratio() {
        // 1% of 1000 kept rows is 10 rows.
        let t = binary_table(9000, 1000);
        for seed in 0..20 {
            let s = subsample_rows(&t, 1000, seed);
            let pos = s.target_labels().unwrap().iter().filter(|l| *l == "pos").count();
            assert!((pos as i64 - 900).abs() <= 10, "seed {seed}: {pos}");
        }
    }

    #[test]
    fn holdout_split_is_stratified() {
        let t = binary_table(50, 50);
        let folds = train_test_split(&t, 0.2, 4).unwrap();
        assert_eq!(folds.test_rows(1).len(), 20);
        let labels = t.target_labels().unwrap();
        assert_eq!(folds.test_rows(1).iter().filter(|&&r| labels[r] == "pos").count(), 10);
    }

    #[test]
    fn validate_checks_label_counts() {
        let bad = Table::new(
            "m",
            vec![Column::numerical("x", [1.0, 2.0]), Column::text("y", ColumnRole::Categorical, ["a", "b"])],
            TargetSpec { column: "y".into(), task: TaskKind::MulticlassClassification },
        );
        assert!(matches!(bad.validate(), Err(TableError::LabelCount { found: 2, .. })));
    }
}
