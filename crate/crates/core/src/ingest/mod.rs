//! CSV loading, general preprocessing and column-role classification.

mod classify;
mod html;
mod report;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{Cell, CellKey, Column, ColumnRole, Table, TableError, TargetSpec, TaskKind};

pub use classify::{
    categorical_threshold, classify_column, coerce_numeric_column, parse_plain, parse_timestamp, split_affix,
    NumericProfile, MAX_AFFIX_LEN, NUMERIC_SHARE,
};
pub use html::strip_html;
pub use report::{ColumnDropReason, DroppedColumn, PreprocessReport, RowDropReason};

pub const DEFAULT_ROW_CAP: usize = 100_000;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}: {message}")]
    ParseError { line: u64, message: String },
    #[error("target column {0:?} not in CSV header")]
    MissingTargetColumn(String),
    #[error("manifest references unknown column {0:?}")]
    UnknownColumn(String),
    #[error("duplicate column name {0:?} in header")]
    DuplicateColumn(String),
    #[error("table is empty after cleaning")]
    EmptyTable,
    #[error("column {column:?}: {failed} of {total} cells failed numeric coercion")]
    CoercionFailure { column: String, failed: usize, total: usize },
    #[error("invalid manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Per-column manual cleaning, applied after general preprocessing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnRule {
    /// Exact cell replacements, e.g. `"3 or 4, not sure" = "3.5"`.
    #[serde(default)]
    pub replace: BTreeMap<String, String>,
    /// Keep only the leading number (`"1234XXX"` -> 1234).
    #[serde(default)]
    pub numeric_prefix: bool,
    /// Unit suffix multipliers (`{ ml = 1, dl = 100, l = 1000 }`).
    #[serde(default)]
    pub units: BTreeMap<String, f64>,
}

impl ColumnRule {
    fn apply(&self, cell: &Cell) -> Cell {
        let Cell::Text(raw) = cell else { return cell.clone() };
        let s = self.replace.get(raw).map(String::as_str).unwrap_or(raw);
        if !self.units.is_empty() {
            if let Some((unit, v)) = split_affix(s) {
                if let Some(scale) = self.units.get(&unit.to_lowercase()) {
                    return Cell::Num(v * scale);
                }
            }
            return Cell::Missing;
        }
        if self.numeric_prefix {
            let t = s.trim_start();
            let end = t.find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-')).unwrap_or(t.len());
            return t[..end].parse::<f64>().map(Cell::Num).unwrap_or(Cell::Missing);
        }
        Cell::Text(s.to_string())
    }
}

fn default_row_cap() -> usize {
    DEFAULT_ROW_CAP
}
fn default_delimiter() -> char {
    ','
}
fn default_true() -> bool {
    true
}

/// Where a dataset lives and how to read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub csv_path: PathBuf,
    pub target_column: String,
    pub task: TaskKind,
    #[serde(default)]
    pub role_overrides: BTreeMap<String, ColumnRole>,
    #[serde(default = "default_row_cap")]
    pub row_cap: usize,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// Columns exempt from the >50% missing rule.
    #[serde(default)]
    pub keep_columns: Vec<String>,
    #[serde(default)]
    pub drop_columns: Vec<String>,
    #[serde(default)]
    pub column_rules: BTreeMap<String, ColumnRule>,
    /// Extra cell strings treated as MISSING (e.g. `"no-data"`).
    #[serde(default)]
    pub missing_markers: Vec<String>,
    #[serde(default = "default_true")]
    pub strip_html: bool,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, csv_path: impl Into<PathBuf>, target_column: impl Into<String>, task: TaskKind) -> Self {
        DatasetManifest {
            name: name.into(),
            csv_path: csv_path.into(),
            target_column: target_column.into(),
            task,
            role_overrides: BTreeMap::new(),
            row_cap: DEFAULT_ROW_CAP,
            delimiter: ',',
            keep_columns: Vec::new(),
            drop_columns: Vec::new(),
            column_rules: BTreeMap::new(),
            missing_markers: Vec::new(),
            strip_html: true,
        }
    }

    /// Reads a TOML (or `.json`) manifest; `csv_path` resolves relative to it.
    pub fn from_file(path: &Path) -> Result<Self, IngestError> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => IngestError::FileNotFound(path.to_path_buf()),
            _ => IngestError::Io { path: path.to_path_buf(), source: e },
        })?;
        let bad = |message: String| IngestError::Manifest { path: path.to_path_buf(), message };
        let mut manifest: DatasetManifest = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| bad(e.to_string()))?
        };
        if manifest.csv_path.is_relative() {
            if let Some(dir) = path.parent() {
                manifest.csv_path = dir.join(&manifest.csv_path);
            }
        }
        Ok(manifest)
    }

    fn preprocess_options(&self) -> PreprocessOptions {
        PreprocessOptions { keep_columns: self.keep_columns.iter().cloned().collect() }
    }
}

fn is_missing_marker(s: &str, extra: &[String]) -> bool {
    matches!(s, "" | "NaN" | "nan") || extra.iter().any(|m| m == s)
}

/// Loaded rows plus the count cut by the row cap.
#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub table: Table,
    pub truncated_rows: usize,
}

/// Reads the CSV named by the manifest; every cell becomes text or MISSING.
pub fn load_csv(manifest: &DatasetManifest) -> Result<Table, IngestError> {
    load_csv_counted(manifest).map(|l| l.table)
}

pub fn load_csv_counted(manifest: &DatasetManifest) -> Result<LoadedCsv, IngestError> {
    let path = &manifest.csv_path;
    if !path.exists() {
        return Err(IngestError::FileNotFound(path.clone()));
    }
    let mut delim = [0u8; 4];
    manifest.delimiter.encode_utf8(&mut delim);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(delim[0])
        .from_path(path)
        .map_err(|e| IngestError::ParseError { line: 1, message: e.to_string() })?;
    let parse_err = |e: csv::Error| IngestError::ParseError {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    };
    let header = reader.headers().map_err(parse_err)?.clone();
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .map(|(i, h)| if h.trim().is_empty() { format!("Unnamed: {i}") } else { h.to_string() })
        .collect();
    let mut seen = HashSet::new();
    for n in &names {
        if !seen.insert(n.as_str()) {
            return Err(IngestError::DuplicateColumn(n.clone()));
        }
    }
    if !names.contains(&manifest.target_column) {
        return Err(IngestError::MissingTargetColumn(manifest.target_column.clone()));
    }
    for col in manifest
        .role_overrides
        .keys()
        .chain(manifest.column_rules.keys())
        .chain(&manifest.keep_columns)
        .chain(&manifest.drop_columns)
    {
        if !names.contains(col) {
            return Err(IngestError::UnknownColumn(col.clone()));
        }
    }

    let mut values: Vec<Vec<Cell>> = vec![Vec::new(); names.len()];
    let mut truncated_rows = 0;
    for record in reader.records() {
        let record = record.map_err(parse_err)?;
        if values[0].len() >= manifest.row_cap {
            truncated_rows += 1;
            continue;
        }
        for (col, field) in values.iter_mut().zip(record.iter()) {
            col.push(if is_missing_marker(field, &manifest.missing_markers) {
                Cell::Missing
            } else {
                Cell::Text(field.to_string())
            });
        }
    }
    let columns = names.into_iter().zip(values).map(|(n, v)| Column::new(n, None, v)).collect();
    let target = TargetSpec { column: manifest.target_column.clone(), task: manifest.task };
    let mut table = Table::new(manifest.name.clone(), columns, target);
    if table.columns.is_empty() {
        table.n_rows = 0;
    }
    Ok(LoadedCsv { table, truncated_rows })
}

#[derive(Debug, Clone, Default)]
pub struct PreprocessOptions {
    pub keep_columns: HashSet<String>,
}

/// The general cleaning pass with default options.
pub fn general_preprocess(table: Table) -> Result<(Table, PreprocessReport), IngestError> {
    general_preprocess_with(table, &PreprocessOptions::default())
}

/// Drops, in order: columns >50% missing, constant columns, duplicate rows,
/// rows with a missing target, and columns named `Unnamed*`.
///
/// The ordered pass repeats until nothing changes, so the result is a fixed
/// point (applying it again is a no-op). The target column is never dropped.
pub fn general_preprocess_with(
    table: Table,
    opts: &PreprocessOptions,
) -> Result<(Table, PreprocessReport), IngestError> {
    let mut report = PreprocessReport::new(table.name.clone(), table.n_rows);
    let mut table = table;
    if table.target_column().is_none() {
        return Err(IngestError::MissingTargetColumn(table.target.column.clone()));
    }
    loop {
        let before = (table.n_rows, table.columns.len());
        preprocess_pass(&mut table, opts, &mut report);
        if (table.n_rows, table.columns.len()) == before || table.n_rows == 0 {
            break;
        }
    }
    report.rows_out = table.n_rows;
    if table.n_rows == 0 || table.feature_columns().next().is_none() {
        return Err(IngestError::EmptyTable);
    }
    Ok((table.reindexed(), report))
}

fn drop_columns_where(
    table: &mut Table,
    report: &mut PreprocessReport,
    reason: ColumnDropReason,
    pred: impl Fn(&Column) -> bool,
) {
    let target = table.target.column.clone();
    table.columns.retain(|c| {
        let drop = c.name != target && pred(c);
        if drop {
            report.dropped_columns.push(DroppedColumn { name: c.name.clone(), reason });
        }
        !drop
    });
}

fn preprocess_pass(table: &mut Table, opts: &PreprocessOptions, report: &mut PreprocessReport) {
    let n = table.n_rows;
    if n == 0 {
        return;
    }
    drop_columns_where(table, report, ColumnDropReason::MissingOverHalf, |c| {
        !opts.keep_columns.contains(&c.name) && c.missing_count() * 2 > n
    });
    drop_columns_where(table, report, ColumnDropReason::Constant, |c| c.unique_non_missing() <= 1);

    let mut seen: HashSet<Vec<CellKey>> = HashSet::with_capacity(n);
    let unique_rows: Vec<usize> = (0..n)
        .filter(|&r| seen.insert(table.columns.iter().map(|c| c.values[r].key()).collect()))
        .collect();
    let n_unique = unique_rows.len();
    *report.dropped_rows.entry(RowDropReason::Duplicate).or_insert(0) += n - n_unique;
    let target = table.target_column().expect("target checked");
    let kept: Vec<usize> = unique_rows.into_iter().filter(|&r| !target.values[r].is_missing()).collect();
    *report.dropped_rows.entry(RowDropReason::MissingTarget).or_insert(0) += n_unique - kept.len();
    if kept.len() != n {
        *table = table.take_rows(&kept);
    }

    drop_columns_where(table, report, ColumnDropReason::Unnamed, |c| c.name.starts_with("Unnamed"));
}

/// Full ingestion: load, clean, apply manifest rules, classify and coerce.
pub fn prepare(manifest: &DatasetManifest) -> Result<(Table, PreprocessReport), IngestError> {
    let LoadedCsv { table, truncated_rows } = load_csv_counted(manifest)?;
    let rows_loaded = table.n_rows;
    let (mut table, mut report) = general_preprocess_with(table, &manifest.preprocess_options())?;
    report.rows_in = rows_loaded + truncated_rows;
    report.dropped_rows.insert(RowDropReason::RowCap, truncated_rows);

    let target = manifest.target_column.clone();
    table.columns.retain(|c| {
        let drop = manifest.drop_columns.contains(&c.name) && c.name != target;
        if drop {
            report.dropped_columns.push(DroppedColumn { name: c.name.clone(), reason: ColumnDropReason::Manual });
        }
        !drop
    });
    if table.feature_columns().next().is_none() {
        return Err(IngestError::EmptyTable);
    }

    let n_rows = table.n_rows;
    let mut columns = Vec::with_capacity(table.columns.len());
    for col in std::mem::take(&mut table.columns) {
        let col = match manifest.column_rules.get(&col.name) {
            Some(rule) => Column { values: col.values.iter().map(|c| rule.apply(c)).collect(), ..col },
            None => col,
        };
        let col = if col.name == target {
            if manifest.task == TaskKind::Regression {
                coerce_numeric_column(&col)?
            } else {
                let values = col
                    .values
                    .into_iter()
                    .map(|c| match c {
                        Cell::Text(s) => Cell::Text(s.trim().to_string()),
                        other => other,
                    })
                    .collect();
                Column { name: col.name, role: Some(ColumnRole::Categorical), values }
            }
        } else {
            let role = manifest
                .role_overrides
                .get(&col.name)
                .copied()
                .unwrap_or_else(|| classify_column(&col, n_rows));
            report.role_assignments.insert(col.name.clone(), role);
            match role {
                ColumnRole::Numerical => coerce_numeric_column(&col)?,
                ColumnRole::Textual if manifest.strip_html => {
                    let values = col
                        .values
                        .into_iter()
                        .map(|c| match c {
                            Cell::Text(s) => Cell::Text(strip_html(&s)),
                            other => other,
                        })
                        .collect();
                    Column { name: col.name, role: Some(role), values }
                }
                _ => Column { role: Some(role), ..col },
            }
        };
        columns.push(col);
    }
    table.columns = columns;
    // Coercion can blank out regression targets.
    if manifest.task == TaskKind::Regression {
        let idx = table.column_index(&target).expect("target");
        let keep: Vec<usize> = (0..table.n_rows).filter(|&r| !table.columns[idx].values[r].is_missing()).collect();
        if keep.len() != table.n_rows {
            *report.dropped_rows.get_mut(&RowDropReason::MissingTarget).expect("key") += table.n_rows - keep.len();
            table = table.take_rows(&keep).reindexed();
            report.rows_out = table.n_rows;
        }
    }
    if table.n_rows == 0 {
        return Err(IngestError::EmptyTable);
    }
    table.validate()?;
    Ok((table, report))
}
