use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use ndarray::Array2;

use super::{ModelError, Predictions};
use crate::embed::{FeatureMatrix, Target};
use crate::table::{Cell, Table};

pub const TARGET_COLUMN: &str = "__target";
const STDERR_TAIL: usize = 2000;

/// How a run_external invocation is configured.
#[derive(Debug, Clone)]
pub struct ExternalCommand<'a> {
    pub command: &'a [String],
    pub timeout: Duration,
}

fn feature_names(m: &FeatureMatrix) -> Vec<String> {
    m.provenance.iter().map(|p| format!("{}:{}:{}", p.source_column, p.encoder, p.index)).collect()
}

fn target_cells(target: &Target) -> Vec<String> {
    match target {
        Target::Regression(v) => v.iter().map(|x| format!("{x}")).collect(),
        Target::Classes { codes, labels } => codes.iter().map(|&c| labels[c].clone()).collect(),
    }
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<(), ModelError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| ModelError::Io(e.to_string()))?;
    w.write_record(header).map_err(|e| ModelError::Io(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| ModelError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| ModelError::Io(e.to_string()))
}

fn matrix_rows(m: &Array2<f64>) -> impl Iterator<Item = Vec<String>> + '_ {
    m.rows().into_iter().map(|r| r.iter().map(|v| format!("{v}")).collect())
}

fn cell_text(c: &Cell) -> String {
    c.as_label().unwrap_or_default()
}

/// Runs the command in `dir` and parses `out.csv`.
fn invoke(
    dir: &Path,
    cmd: &ExternalCommand,
    n_test: usize,
    labels: Option<&[String]>,
) -> Result<Predictions, ModelError> {
    let (program, args) = cmd.command.split_first().ok_or_else(|| ModelError::InvalidConfig("empty command".into()))?;
    let mut child = Command::new(program)
        .args(args)
        .args(["train.csv", "test.csv", "out.csv"])
        .current_dir(dir)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| ModelError::Spawn { command: program.clone(), message: e.to_string() })?;
    let mut stderr = child.stderr.take().expect("stderr is piped");
    let reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr.read_to_end(&mut buf);
        buf
    });
    let start = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait().map_err(|e| ModelError::Io(e.to_string()))? {
            break status;
        }
        if start.elapsed() > cmd.timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ModelError::Timeout(cmd.timeout.as_secs_f64()));
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let err_bytes = reader.join().unwrap_or_default();
    if !status.success() {
        let text = String::from_utf8_lossy(&err_bytes);
        let cut = text.char_indices().rev().nth(STDERR_TAIL).map_or(0, |(i, _)| i);
        return Err(ModelError::NonZeroExit { code: status.code(), stderr_tail: text[cut..].to_string() });
    }
    parse_output(&dir.join("out.csv"), n_test, labels)
}

/// Parses a predictions file with header `prediction[,proba_<label>...]`.
pub fn parse_output(path: &Path, n_test: usize, labels: Option<&[String]>) -> Result<Predictions, ModelError> {
    let bad = |m: String| ModelError::BadOutputShape(m);
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(format!("cannot read out.csv: {e}")))?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.get(0) != Some("prediction") {
        return Err(bad("first column must be named 'prediction'".into()));
    }
    let proba_cols: Vec<String> = header
        .iter()
        .skip(1)
        .map(|h| h.strip_prefix("proba_").map(str::to_string).ok_or_else(|| bad(format!("unexpected column '{h}'"))))
        .collect::<Result<_, _>>()?;
    let records: Vec<csv::StringRecord> = r.records().collect::<Result<_, _>>().map_err(|e| bad(e.to_string()))?;
    if records.len() != n_test {
        return Err(bad(format!("expected {n_test} prediction rows, got {}", records.len())));
    }
    match labels {
        None => {
            let values = records
                .iter()
                .map(|rec| rec[0].trim().parse::<f64>().map_err(|_| bad(format!("non-numeric prediction '{}'", &rec[0]))))
                .collect::<Result<_, _>>()?;
            Ok(Predictions::Values(values))
        }
        Some(labels) => {
            let codes = records
                .iter()
                .map(|rec| {
                    labels.iter().position(|l| l == rec[0].trim()).ok_or_else(|| bad(format!("unknown label '{}'", &rec[0])))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let proba = if proba_cols.is_empty() {
                None
            } else {
                let mut p = Array2::zeros((n_test, labels.len()));
                for (j, name) in proba_cols.iter().enumerate() {
                    let c = labels.iter().position(|l| l == name).ok_or_else(|| bad(format!("unknown class '{name}'")))?;
                    for (i, rec) in records.iter().enumerate() {
                        p[[i, c]] = rec
                            .get(j + 1)
                            .and_then(|v| v.trim().parse::<f64>().ok())
                            .ok_or_else(|| bad(format!("bad probability in row {}", i + 1)))?;
                    }
                }
                Some(p)
            };
            Ok(Predictions::Classes { codes, proba, labels: labels.to_vec() })
        }
    }
}

fn class_labels(target: &Target) -> Option<Vec<String>> {
    match target {
        Target::Regression(_) => None,
        Target::Classes { labels, .. } => Some(labels.clone()),
    }
}

/// Feature-matrix mode.
pub fn run_external(cmd: &ExternalCommand, train: &FeatureMatrix, test: &FeatureMatrix) -> Result<Predictions, ModelError> {
    let dir = tempfile::tempdir().map_err(|e| ModelError::Io(e.to_string()))?;
    let names = feature_names(train);
    let mut header = names.clone();
    header.push(TARGET_COLUMN.to_string());
    let targets = target_cells(&train.target);
    write_csv(
        &dir.path().join("train.csv"),
        &header,
        matrix_rows(&train.matrix).zip(targets).map(|(mut r, t)| {
            r.push(t);
            r
        }),
    )?;
    write_csv(&dir.path().join("test.csv"), &names, matrix_rows(&test.matrix))?;
    invoke(dir.path(), cmd, test.n_rows(), class_labels(&train.target).as_deref())
}

/// Raw-table mode: every non-target column is passed through verbatim,
/// text included.
pub fn run_external_raw(cmd: &ExternalCommand, train: &Table, test: &Table) -> Result<Predictions, ModelError> {
    let dir = tempfile::tempdir().map_err(|e| ModelError::Io(e.to_string()))?;
    let cols: Vec<_> = train.feature_columns().collect();
    let names: Vec<String> = cols.iter().map(|c| c.name.clone()).collect();
    let mut header = names.clone();
    header.push(TARGET_COLUMN.to_string());
    let target = train.target_column().ok_or_else(|| ModelError::InvalidConfig("train table has no target".into()))?;
    write_csv(
        &dir.path().join("train.csv"),
        &header,
        (0..train.n_rows).map(|i| {
            let mut r: Vec<String> = cols.iter().map(|c| cell_text(&c.values[i])).collect();
            r.push(cell_text(&target.values[i]));
            r
        }),
    )?;
    let test_cols: Vec<_> = names
        .iter()
        .map(|n| test.column(n).ok_or_else(|| ModelError::InvalidConfig(format!("test table lacks column '{n}'"))))
        .collect::<Result<_, _>>()?;
    write_csv(
        &dir.path().join("test.csv"),
        &names,
        (0..test.n_rows).map(|i| test_cols.iter().map(|c| cell_text(&c.values[i])).collect()),
    )?;
    let labels = if train.task().is_classification() { Some(train.label_set().map_err(|e| ModelError::InvalidConfig(e.to_string()))?) } else { None };
    invoke(dir.path(), cmd, test.n_rows, labels.as_deref())
}
