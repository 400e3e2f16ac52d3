//! Synthetic text-injection scenarios that probe where each embedder breaks.
//!
//! Each scenario replaces the binary target with a text column whose
//! content is derived from the label, then scores a model with text
//! features on a single stratified holdout split.

use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbedError, Embedder, EmbedderKind, FeaturePipeline};
use crate::eval::metric_accuracy;
use crate::models::{fit_predict, ModelError, ModelKind};
use crate::rng::{derive, seeded};
use crate::table::{subsample_rows, train_test_split, Column, ColumnRole, Table, TableError, TargetSpec, TaskKind};

mod banks;

pub use banks::*;

pub const BREAK_COLUMN: &str = "break_text";
pub const DEFAULT_DILUTION: usize = 3;
pub const DEFAULT_SUBSAMPLE: usize = 100;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Error)]
pub enum BreakError {
    #[error("table {0:?} is not a binary classification table")]
    NotBinary(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("scoring failed: {0}")]
    Score(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BreakScenario {
    NoText,
    CompleteLeak,
    SynonymOod,
    NoiseDilution(usize),
    AmbiguityDilution(usize),
}

impl BreakScenario {
    pub fn standard() -> Vec<BreakScenario> {
        vec![
            BreakScenario::NoText,
            BreakScenario::CompleteLeak,
            BreakScenario::SynonymOod,
            BreakScenario::NoiseDilution(DEFAULT_DILUTION),
            BreakScenario::AmbiguityDilution(DEFAULT_DILUTION),
        ]
    }

    pub fn validate(self) -> Result<(), BreakError> {
        match self {
            BreakScenario::NoiseDilution(0) | BreakScenario::AmbiguityDilution(0) => {
                Err(BreakError::InvalidScenario(format!("{self}: word count must be >= 1")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for BreakScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BreakScenario::NoText => f.write_str("no-text"),
            BreakScenario::CompleteLeak => f.write_str("complete-leak"),
            BreakScenario::SynonymOod => f.write_str("synonym-ood"),
            BreakScenario::NoiseDilution(m) => write!(f, "noise-dilution:{m}"),
            BreakScenario::AmbiguityDilution(m) => write!(f, "ambiguity-dilution:{m}"),
        }
    }
}

impl FromStr for BreakScenario {
    type Err = BreakError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let m = match arg {
            Some(a) => a.trim().parse::<usize>().map_err(|_| BreakError::InvalidScenario(s.to_string()))?,
            None => DEFAULT_DILUTION,
        };
        let sc = match name.trim() {
            "no-text" => BreakScenario::NoText,
            "complete-leak" => BreakScenario::CompleteLeak,
            "synonym-ood" => BreakScenario::SynonymOod,
            "noise-dilution" => BreakScenario::NoiseDilution(m),
            "ambiguity-dilution" => BreakScenario::AmbiguityDilution(m),
            _ => return Err(BreakError::InvalidScenario(s.to_string())),
        };
        sc.validate()?;
        Ok(sc)
    }
}

impl TryFrom<String> for BreakScenario {
    type Error = BreakError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<BreakScenario> for String {
    fn from(s: BreakScenario) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

fn row_rng(seed: u64, split: Split, row_id: usize) -> crate::rng::Rng {
    let salt = match split {
        Split::Train => 1,
        Split::Test => 2,
    };
    seeded(derive(derive(seed, salt), row_id as u64))
}

fn diluted(label_word: &str, pool: &[&str], m: usize, rng: &mut crate::rng::Rng) -> String {
    let mut words: Vec<&str> = pool.choose_multiple(rng, m.min(pool.len())).copied().collect();
    words.push(label_word);
    words.shuffle(rng);
    words.join(" ")
}

/// Adds the scenario's text column to `table`. Class codes follow the
/// sorted label set, so code 0 maps to "good" / "positive".
pub fn inject(table: &Table, scenario: BreakScenario, split: Split, seed: u64) -> Result<Table, BreakError> {
    scenario.validate()?;
    if table.task() != TaskKind::BinaryClassification {
        return Err(BreakError::NotBinary(table.name.clone()));
    }
    let (codes, labels) = table.target_codes()?;
    if labels.len() != 2 {
        return Err(BreakError::NotBinary(table.name.clone()));
    }
    let mut out = table.clone();
    out.columns.retain(|c| c.name != BREAK_COLUMN);
    if scenario == BreakScenario::NoText {
        return Ok(out);
    }
    let bank = WordBank::standard();
    let union = bank.sentiment_union();
    let cells: Vec<String> = codes
        .iter()
        .zip(&table.row_ids)
        .map(|(&code, &row_id)| {
            let mut rng = row_rng(seed, split, row_id);
            match scenario {
                BreakScenario::CompleteLeak => labels[code].clone(),
                BreakScenario::SynonymOod => {
                    let pool = match split {
                        Split::Train => &bank.synonym_train[code],
                        Split::Test => &bank.synonym_test[code],
                    };
                    pool.choose(&mut rng).expect("nonempty bank").to_string()
                }
                BreakScenario::NoiseDilution(m) => diluted(LABEL_WORDS[code], &bank.random_words, m, &mut rng),
                BreakScenario::AmbiguityDilution(m) => diluted(LABEL_WORDS[code], &union, m, &mut rng),
                BreakScenario::NoText => unreachable!(),
            }
        })
        .collect();
    out.columns.push(Column::text(BREAK_COLUMN, ColumnRole::Textual, cells));
    Ok(out)
}

/// Seed of the first bundled synthetic table.
pub const BUNDLED_SEED: u64 = 20240611;

/// `n` bundled synthetic tables named `synthetic_0..`, seeded from
/// [`BUNDLED_SEED`] upward.
pub fn bundled_tables(n: usize) -> Vec<Table> {
    (0..n)
        .map(|i| {
            let mut t = synthetic_binary_table(BUNDLED_SEED + i as u64);
            t.name = format!("synthetic_{i}");
            t
        })
        .collect()
}

/// A 200-row balanced yes/no table with one weakly informative numeric
/// column and label-independent filler.
pub fn synthetic_binary_table(seed: u64) -> Table {
    let n = 200;
    let mut rng = seeded(seed);
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let mut labels: Vec<&str> = (0..n).map(|i| if i % 2 == 0 { "yes" } else { "no" }).collect();
    labels.shuffle(&mut rng);
    let x1: Vec<f64> = labels.iter().map(|l| normal.sample(&mut rng) + if *l == "yes" { 0.3 } else { 0.0 }).collect();
    let x2: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let x3: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    let group: Vec<&str> = (0..n).map(|_| ["north", "south", "east", "west"][rng.random_range(0..4)]).collect();
    Table::new(
        "synthetic",
        vec![
            Column::numerical("x1", x1),
            Column::numerical("x2", x2),
            Column::numerical("x3", x3),
            Column::text("group", ColumnRole::Categorical, group),
            Column::text("label", ColumnRole::Categorical, labels),
        ],
        TargetSpec { column: "label".into(), task: TaskKind::BinaryClassification },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakOptions {
    pub scenarios: Vec<BreakScenario>,
    pub subsample: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl BreakOptions {
    pub fn new(seed: u64) -> Self {
        BreakOptions {
            scenarios: BreakScenario::standard(),
            subsample: DEFAULT_SUBSAMPLE,
            test_fraction: DEFAULT_TEST_FRACTION,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakCell {
    pub scenario: BreakScenario,
    pub embedder: String,
    pub table: String,
    /// Percent.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakMatrix {
    pub scenarios: Vec<BreakScenario>,
    pub embedders: Vec<String>,
    pub tables: Vec<String>,
    pub cells: Vec<BreakCell>,
}

impl BreakMatrix {
    pub fn get(&self, scenario: BreakScenario, embedder: &str, table: &str) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && c.embedder == embedder && c.table == table)
            .map(|c| c.accuracy)
    }

    pub fn average(&self, scenario: BreakScenario, embedder: &str) -> Option<f64> {
        let v: Vec<f64> =
            self.cells.iter().filter(|c| c.scenario == scenario && c.embedder == embedder).map(|c| c.accuracy).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    fn scenario_title(&self, s: BreakScenario) -> String {
        let built_in_only = !self.embedders.iter().any(|e| e == "external");
        match s {
            BreakScenario::AmbiguityDilution(_) if built_in_only => format!("{s} (non-LLM surrogate)"),
            _ => s.to_string(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["scenario", "table", "embedder", "accuracy"]).expect("in-memory write");
        for c in &self.cells {
            w.write_record([self.scenario_title(c.scenario), c.table.clone(), c.embedder.clone(), format!("{:.1}", c.accuracy)])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    /// Scenario blocks with one row per table plus an Average row.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<Vec<String>> = vec![
            ["scenario".to_string(), "dataset".to_string()].into_iter().chain(self.embedders.iter().cloned()).collect(),
        ];
        for &s in &self.scenarios {
            let mut title = Some(self.scenario_title(s));
            let names = self.tables.iter().map(|t| (t.clone(), Some(t.as_str()))).chain([("Average".to_string(), None)]);
            for (name, table) in names {
                let mut row = vec![title.take().unwrap_or_default(), name];
                for e in &self.embedders {
                    let v = match table {
                        Some(t) => self.get(s, e, t),
                        None => self.average(s, e),
                    };
                    row.push(v.map_or_else(|| "--".into(), |v| format!("{v:.1}")));
                }
                rows.push(row);
            }
        }
        let widths: Vec<usize> =
            (0..rows[0].len()).map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for r in &rows {
            let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// Accuracy (percent) of one scenario, embedder and table.
pub fn score_cell(
    table: &Table,
    embedder: &Embedder,
    model: &ModelKind,
    scenario: BreakScenario,
    opts: &BreakOptions,
) -> Result<f64, BreakError> {
    let sub = subsample_rows(table, opts.subsample, derive(opts.seed, 10));
    let split = train_test_split(&sub, opts.test_fraction, derive(opts.seed, 11))?;
    let train = inject(&sub.take_rows(&split.train_rows(1)), scenario, Split::Train, opts.seed)?;
    let test = inject(&sub.take_rows(&split.test_rows(1)), scenario, Split::Test, opts.seed)?;
    let pipeline = FeaturePipeline::fit(&train, embedder, true, derive(opts.seed, 12))?;
    let tr = pipeline.transform(&train)?;
    let te = pipeline.transform(&test)?;
    let (preds, _) = fit_predict(model, &tr, &te, Some((&train, &test)))?;
    let truth = test.target_labels()?;
    let acc = metric_accuracy(&truth, &preds.label_strings()).map_err(|e| BreakError::Score(e.to_string()))?;
    Ok(100.0 * acc)
}

pub fn run_break_suite(
    tables: &[Table],
    embedders: &[EmbedderKind],
    model: &ModelKind,
    seed: u64,
) -> Result<BreakMatrix, BreakError> {
    run_break_suite_with(tables, embedders, model, &BreakOptions::new(seed))
}

pub fn run_break_suite_with(
    tables: &[Table],
    embedders: &[EmbedderKind],
    model: &ModelKind,
    opts: &BreakOptions,
) -> Result<BreakMatrix, BreakError> {
    for s in &opts.scenarios {
        s.validate()?;
    }
    let prepared: Vec<Vec<Embedder>> = tables
        .iter()
        .map(|t| embedders.iter().map(|k| Embedder::prepare(k, t)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    let mut jobs = Vec::new();
    for &s in &opts.scenarios {
        for (ei, e) in embedders.iter().enumerate() {
            for ti in 0..tables.len() {
                jobs.push((s, ei, e.tag().to_string(), ti));
            }
        }
    }
    let cells: Vec<BreakCell> = jobs
        .into_par_iter()
        .map(|(s, ei, name, ti)| {
            let acc = score_cell(&tables[ti], &prepared[ti][ei], model, s, opts)?;
            Ok(BreakCell { scenario: s, embedder: name, table: tables[ti].name.clone(), accuracy: acc })
        })
        .collect::<Result<_, BreakError>>()?;
    let mut names: Vec<String> = Vec::new();
    for e in embedders {
        if !names.iter().any(|n| n == e.tag()) {
            names.push(e.tag().to_string());
        }
    }
    Ok(BreakMatrix {
        scenarios: opts.scenarios.clone(),
        embedders: names,
        tables: tables.iter().map(|t| t.name.clone()).collect(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn injected(s: BreakScenario, split: Split) -> (Table, Vec<String>) {
        let t = synthetic_binary_table(3);
        let out = inject(&t, s, split, 9).unwrap();
        let cells = crate::embed::text_values(&out, BREAK_COLUMN);
        (out, cells)
    }

    #[test]
    fn leak_copies_label() {
        let (t, cells) = injected(BreakScenario::CompleteLeak, Split::Train);
        assert_eq!(cells, t.target_labels().unwrap());
    }

    #[test]
    fn ood_test_split_uses_test_synonyms() {
        let (t, cells) = injected(BreakScenario::SynonymOod, Split::Test);
        let (codes, _) = t.target_codes().unwrap();
        for (c, cell) in codes.iter().zip(&cells) {
            assert_eq!(cell, if *c == 0 { "nice" } else { "two" });
        }
    }

    #[test]
    fn noise_cells_have_one_label_word() {
        let (_, cells) = injected(BreakScenario::NoiseDilution(5), Split::Train);
        for cell in cells {
            let words: Vec<&str> = cell.split(' ').collect();
            assert_eq!(words.len(), 6);
            assert_eq!(words.iter().filter(|w| LABEL_WORDS.contains(w)).count(), 1);
            assert_eq!(words.iter().filter(|w| RANDOM_WORDS.contains(w)).count(), 5);
        }
    }

    #[test]
    fn no_text_adds_nothing() {
        let t = synthetic_binary_table(3);
        assert_eq!(inject(&t, BreakScenario::NoText, Split::Train, 1).unwrap(), t);
    }

    #[test]
    fn rejects_regression_and_zero_dilution() {
        let mut t = synthetic_binary_table(3);
        assert!(inject(&t, BreakScenario::NoiseDilution(0), Split::Train, 1).is_err());
        t.target.task = TaskKind::Regression;
        assert!(matches!(inject(&t, BreakScenario::CompleteLeak, Split::Train, 1), Err(BreakError::NotBinary(_))));
    }

    #[test]
    fn scenario_names_round_trip() {
        for s in BreakScenario::standard() {
            assert_eq!(s.to_string().parse::<BreakScenario>().unwrap(), s);
        }
        assert_eq!("noise-dilution:30".parse::<BreakScenario>().unwrap(), BreakScenario::NoiseDilution(30));
    }

    #[test]
    fn synthetic_table_is_balanced() {
        let t = synthetic_binary_table(1);
        assert_eq!(t.n_rows, 200);
        let yes = t.target_labels().unwrap().iter().filter(|l| *l == "yes").count();
        assert_eq!(yes, 100);
    }
}
