use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::json;

use super::{EvalError, EvalResult, ExperimentSpec};

#[derive(Debug, Clone)]
pub enum Outcome {
    Done(EvalResult),
    /// Selector or model does not apply to the task; never run.
    Inapplicable,
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct ReportEntry {
    pub spec: ExperimentSpec,
    pub outcome: Outcome,
}

impl ReportEntry {
    pub fn done(result: EvalResult) -> Self {
        ReportEntry { spec: result.spec.clone(), outcome: Outcome::Done(result) }
    }

    fn status(&self) -> &'static str {
        match &self.outcome {
            Outcome::Done(r) if r.spec.selector.is_some() && !r.selection_applied => "below_cap",
            Outcome::Done(_) => "ok",
            Outcome::Inapplicable => "inapplicable",
            Outcome::Failed(_) => "failed",
        }
    }

    /// `mean±std`, or `--` for cells without a number.
    pub fn cell(&self) -> String {
        match &self.outcome {
            Outcome::Done(r) if self.status() == "ok" => format_cell(r.mean, r.std),
            _ => "--".into(),
        }
    }

    fn scored_mean(&self) -> Option<f64> {
        match &self.outcome {
            Outcome::Done(r) if self.status() == "ok" => Some(r.mean),
            _ => None,
        }
    }
}

pub fn format_cell(mean: f64, std: f64) -> String {
    format!("{mean:.3}±{std:.3}")
}

/// Rendered report files.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub csv: String,
    pub text: String,
    pub lock: serde_json::Value,
}

const CSV_HEADER: [&str; 14] = [
    "dataset",
    "task",
    "metric",
    "model",
    "embedder",
    "selector",
    "with_text",
    "status",
    "mean",
    "std",
    "per_fold",
    "cell",
    "spec_hash",
    "seed",
];

fn csv_text(entries: &[ReportEntry]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for e in entries {
        let s = &e.spec;
        let (metric, mean, std, folds) = match &e.outcome {
            Outcome::Done(r) => (
                r.metric_name.to_string(),
                format!("{}", r.mean),
                format!("{}", r.std),
                r.per_fold.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(";"),
            ),
            _ => (String::new(), String::new(), String::new(), String::new()),
        };
        w.write_record([
            s.manifest.name.clone(),
            s.manifest.task.tag().to_string(),
            metric,
            s.model.tag().to_string(),
            s.embedder.tag().to_string(),
            s.selector_label(),
            s.with_text.to_string(),
            e.status().to_string(),
            mean,
            std,
            folds,
            e.cell(),
            s.hash(),
            s.seed.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

fn group_key(s: &ExperimentSpec) -> String {
    format!("{}/{}/{}", s.model.tag(), s.embedder.tag(), s.selector_label())
}

fn align(rows: &[Vec<String>]) -> String {
    let ncol = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..ncol).map(|j| rows.iter().filter_map(|r| r.get(j)).map(|c| c.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(j, c)| format!("{c}{}", " ".repeat(widths[j] - c.chars().count())))
            .collect();
        out.push_str(line.join(" | ").trim_end());
        out.push('\n');
    }
    out
}

fn text(entries: &[ReportEntry]) -> String {
    // Column order follows first appearance.
    let mut columns: Vec<(String, bool)> = Vec::new();
    let mut datasets: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(String, String, bool), &ReportEntry> = BTreeMap::new();
    for e in entries {
        let col = (group_key(&e.spec), e.spec.with_text);
        if !columns.contains(&col) {
            columns.push(col.clone());
        }
        if !datasets.contains(&e.spec.manifest.name) {
            datasets.push(e.spec.manifest.name.clone());
        }
        cells.insert((e.spec.manifest.name.clone(), col.0, col.1), e);
    }

    let mut rows = vec![std::iter::once("dataset".to_string())
        .chain(columns.iter().map(|(g, t)| format!("{g}/{}", if *t { "text" } else { "no-text" })))
        .collect::<Vec<_>>()];
    for d in &datasets {
        let mut row = vec![d.clone()];
        for (g, t) in &columns {
            let Some(e) = cells.get(&(d.clone(), g.clone(), *t)) else {
                row.push(String::new());
                continue;
            };
            let mut c = e.cell();
            let other = cells.get(&(d.clone(), g.clone(), !*t)).and_then(|o| o.scored_mean());
            if let (Some(me), Some(other)) = (e.scored_mean(), other) {
                if me >= other {
                    c.push('*');
                }
            }
            row.push(c);
        }
        rows.push(row);
    }
    let mut out = align(&rows);

    let best = best_embedding(entries);
    if !best.is_empty() {
        out.push_str("\nbest embedding (max over embedders, no selector)\n");
        out.push_str(&align(&best));
    }

    let failures: Vec<&ReportEntry> = entries.iter().filter(|e| matches!(e.outcome, Outcome::Failed(_))).collect();
    if !failures.is_empty() {
        out.push_str("\nfailures\n");
        for e in failures {
            if let Outcome::Failed(msg) = &e.outcome {
                out.push_str(&format!("{}: {msg}\n", e.spec.label()));
            }
        }
    }
    out
}

/// Report-side reduction: best with-text mean over embedders per
/// (dataset, model), next to the without-text mean.
fn best_embedding(entries: &[ReportEntry]) -> Vec<Vec<String>> {
    let mut best: BTreeMap<(String, String), (f64, String, f64)> = BTreeMap::new();
    let mut without: BTreeMap<(String, String), f64> = BTreeMap::new();
    for e in entries.iter().filter(|e| e.spec.selector.is_none()) {
        let Some(m) = e.scored_mean() else { continue };
        let key = (e.spec.manifest.name.clone(), e.spec.model.tag().to_string());
        if e.spec.with_text {
            let std = match &e.outcome {
                Outcome::Done(r) => r.std,
                _ => 0.0,
            };
            let slot = best.entry(key).or_insert((f64::NEG_INFINITY, String::new(), 0.0));
            if m > slot.0 {
                *slot = (m, e.spec.embedder.tag().to_string(), std);
            }
        } else {
            let slot = without.entry(key).or_insert(f64::NEG_INFINITY);
            *slot = slot.max(m);
        }
    }
    if best.is_empty() {
        return Vec::new();
    }
    let mut rows = vec![["dataset", "model", "embedder", "with text", "without text", "uplift"]
        .map(String::from)
        .to_vec()];
    for ((d, model), (m, emb, std)) in best {
        let (wo, up) = match without.get(&(d.clone(), model.clone())) {
            Some(w) => (format!("{w:.3}"), format!("{:+.3}", m - w)),
            None => ("--".into(), "--".into()),
        };
        rows.push(vec![d, model, emb, format_cell(m, std), wo, up]);
    }
    rows
}

fn lock(entries: &[ReportEntry]) -> serde_json::Value {
    let cells: Vec<_> = entries
        .iter()
        .map(|e| {
            json!({
                "label": e.spec.label(),
                "spec_hash": e.spec.hash(),
                "seed": e.spec.seed,
                "status": e.status(),
                "spec": e.spec,
            })
        })
        .collect();
    json!({ "cells": cells })
}

pub fn render_report(entries: &[ReportEntry]) -> Report {
    Report { csv: csv_text(entries), text: text(entries), lock: lock(entries) }
}

/// Writes `results.csv`, `results.txt` and `manifest-lock` into `dir`.
pub fn emit_report(dir: &Path, entries: &[ReportEntry]) -> Result<Report, EvalError> {
    let report = render_report(entries);
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EvalError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let files = [
        ("results.csv", report.csv.clone()),
        ("results.txt", report.text.clone()),
        ("manifest-lock", serde_json::to_string_pretty(&report.lock).expect("json") + "\n"),
    ];
    for (name, body) in files {
        let p = dir.join(name);
        fs::write(&p, body).map_err(io(&p))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbedderKind;
    use crate::ingest::DatasetManifest;
    use crate::models::ModelKind;
    use crate::select::SelectorKind;
    use crate::table::TaskKind;

    fn spec(with_text: bool, task: TaskKind) -> ExperimentSpec {
        let m = DatasetManifest::new("frauds", "f.csv", "y", task);
        ExperimentSpec::new(m, EmbedderKind::tfidf(), ModelKind::gbdt(), with_text, 1)
    }

    fn done(with_text: bool, mean: f64, std: f64) -> ReportEntry {
        let s = spec(with_text, TaskKind::BinaryClassification);
        ReportEntry::done(EvalResult {
            spec: s,
            per_fold: vec![mean; 5],
            mean,
            std,
            metric_name: "accuracy",
            selection_applied: false,
            fold_fingerprints: vec![],
        })
    }

    #[test]
    fn cell_format() {
        assert_eq!(format_cell(0.962, 0.008), "0.962±0.008");
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = render_report(&[]);
        assert_eq!(r.csv.lines().count(), 1);
        assert_eq!(r.text, "dataset\n");
    }

    #[test]
    fn inapplicable_and_below_cap_cells_are_dashes() {
        let mut s = spec(true, TaskKind::Regression);
        s.selector = Some(SelectorKind::TTest);
        let e = ReportEntry { spec: s, outcome: Outcome::Inapplicable };
        assert_eq!(e.cell(), "--");
        let mut below = done(true, 0.9, 0.01);
        below.spec.selector = Some(SelectorKind::Variance);
        if let Outcome::Done(r) = &mut below.outcome {
            r.spec.selector = Some(SelectorKind::Variance);
        }
        assert_eq!(below.cell(), "--");
    }

    #[test]
    fn better_side_is_marked() {
        let r = render_report(&[done(true, 0.962, 0.008), done(false, 0.9, 0.01)]);
        assert!(r.text.contains("0.962±0.008*"), "{}", r.text);
        assert!(!r.text.contains("0.900±0.010*"));
        assert!(r.text.contains("best embedding"));
        assert_eq!(r.csv.lines().count(), 3);
    }
}
