//! Predictive models behind one interface, plus the external-command adapter.

use std::time::Duration;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{FeatureMatrix, Target};
use crate::table::{Table, TaskKind};

mod external;
mod gbdt;
mod linear;

pub use external::{parse_output, run_external, run_external_raw, ExternalCommand, TARGET_COLUMN};
pub use gbdt::{gbdt_fit, GbdtModel, Node, Objective, Tree, HESSIAN_FLOOR, LAMBDA};
pub use linear::{logistic_fit, ridge_fit, LogisticParams, RidgeParams};
pub(crate) use linear::{sigmoid, softmax_rows};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("linear system is singular (use alpha > 0)")]
    SingularSystem,
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("model expects {expected} features, got {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("target has {found} values for {expected} rows")]
    TargetLength { expected: usize, found: usize },
    #[error("model '{model}' does not support {task} tasks")]
    TaskMismatch { model: &'static str, task: &'static str },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("external command exited with {code:?}: {stderr_tail}")]
    NonZeroExit { code: Option<i32>, stderr_tail: String },
    #[error("external output has the wrong shape: {0}")]
    BadOutputShape(String),
    #[error("external command timed out after {0} s")]
    Timeout(f64),
    #[error("cannot start '{command}': {message}")]
    Spawn { command: String, message: String },
    #[error("external models predict train and test together; use fit_predict")]
    NeedsTestSet,
    #[error("i/o: {0}")]
    Io(String),
}

fn default_alpha() -> f64 {
    1.0
}
fn default_l2() -> f64 {
    1.0
}
fn default_max_iter() -> usize {
    1000
}
fn default_depth() -> usize {
    6
}
fn default_lr() -> f64 {
    0.3
}
fn default_rounds() -> usize {
    100
}
fn default_timeout() -> u64 {
    600
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Least squares with an L2 penalty. Classification fits one-vs-rest
    /// targets in {-1, 1} and predicts the arg-max.
    Ridge {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Logistic {
        #[serde(default = "default_l2")]
        l2: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
    },
    Gbdt {
        #[serde(default = "default_depth")]
        max_depth: usize,
        #[serde(default = "default_lr")]
        learning_rate: f64,
        #[serde(default = "default_rounds")]
        n_rounds: usize,
    },
    /// `command` is the program followed by fixed arguments; the train,
    /// test and output file names are appended.
    External {
        command: Vec<String>,
        #[serde(default)]
        raw_table: bool,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
    /// Majority class or training mean.
    Constant,
}

impl ModelKind {
    pub fn gbdt() -> Self {
        ModelKind::Gbdt { max_depth: 6, learning_rate: 0.3, n_rounds: 100 }
    }

    pub fn ridge() -> Self {
        ModelKind::Ridge { alpha: 1.0 }
    }

    pub fn logistic() -> Self {
        ModelKind::Logistic { l2: 1.0, max_iter: 1000 }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::Ridge { .. } => "ridge",
            ModelKind::Logistic { .. } => "logistic",
            ModelKind::Gbdt { .. } => "gbdt",
            ModelKind::External { .. } => "external",
            ModelKind::Constant => "constant",
        }
    }

    pub fn supports(&self, task: TaskKind) -> bool {
        !matches!((self, task), (ModelKind::Logistic { .. }, TaskKind::Regression))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        match self {
            ModelKind::Ridge { alpha } if !(*alpha >= 0.0) => bad("ridge alpha must be >= 0"),
            ModelKind::Logistic { l2, .. } if !(*l2 >= 0.0) => bad("logistic l2 must be >= 0"),
            ModelKind::Gbdt { max_depth, learning_rate, n_rounds } => {
                if *max_depth < 1 {
                    bad("gbdt max_depth must be >= 1")
                } else if !(*learning_rate > 0.0 && *learning_rate <= 1.0) {
                    bad("gbdt learning_rate must lie in (0, 1]")
                } else if *n_rounds < 1 {
                    bad("gbdt n_rounds must be >= 1")
                } else {
                    Ok(())
                }
            }
            ModelKind::External { command, .. } if command.is_empty() => bad("external command is empty"),
            _ => Ok(()),
        }
    }
}

/// Model output for a batch of rows.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Values(Vec<f64>),
    /// `codes` index into `labels`; `proba` is `n x labels.len()`.
    Classes { codes: Vec<usize>, proba: Option<Array2<f64>>, labels: Vec<String> },
}

impl Predictions {
    pub fn len(&self) -> usize {
        match self {
            Predictions::Values(v) => v.len(),
            Predictions::Classes { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Predicted label strings (classification only).
    pub fn label_strings(&self) -> Vec<String> {
        match self {
            Predictions::Values(v) => v.iter().map(|x| format!("{x}")).collect(),
            Predictions::Classes { codes, labels, .. } => codes.iter().map(|&c| labels[c].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Fitted {
    Ridge(RidgeParams),
    RidgeClassifier(Vec<RidgeParams>),
    Logistic(LogisticParams),
    Gbdt(GbdtModel),
    ConstantValue(f64),
    ConstantClass(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub kind: ModelKind,
    pub task: TaskKind,
    pub n_features_expected: usize,
    /// Class labels the model was trained with; empty for regression.
    pub labels: Vec<String>,
    fitted: Fitted,
}

fn check_finite(x: &Array2<f64>) -> Result<(), ModelError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NonFiniteInput)
    }
}

fn majority(codes: &[usize], n_classes: usize) -> usize {
    let mut counts = vec![0usize; n_classes.max(1)];
    for &c in codes {
        counts[c] += 1;
    }
    // Lowest code wins ties.
    (0..counts.len()).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).unwrap_or(0)
}

pub fn fit(kind: &ModelKind, train: &FeatureMatrix) -> Result<FittedModel, ModelError> {
    kind.validate()?;
    let x = &train.matrix;
    check_finite(x)?;
    if train.target.len() != x.nrows() {
        return Err(ModelError::TargetLength { expected: x.nrows(), found: train.target.len() });
    }
    if x.nrows() == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let (task, labels) = match &train.target {
        Target::Regression(_) => (TaskKind::Regression, Vec::new()),
        Target::Classes { labels, .. } if labels.len() <= 2 => (TaskKind::BinaryClassification, labels.clone()),
        Target::Classes { labels, .. } => (TaskKind::MulticlassClassification, labels.clone()),
    };
    if !kind.supports(task) {
        return Err(ModelError::TaskMismatch { model: kind.tag(), task: task.tag() });
    }
    let fitted = match (&train.target, kind) {
        (_, ModelKind::External { .. }) => return Err(ModelError::NeedsTestSet),
        (Target::Regression(y), ModelKind::Constant) => Fitted::ConstantValue(y.iter().sum::<f64>() / y.len() as f64),
        (Target::Classes { codes, labels }, ModelKind::Constant) => Fitted::ConstantClass(majority(codes, labels.len())),
        (Target::Classes { codes, labels }, _) if labels.len() < 2 => Fitted::ConstantClass(majority(codes, labels.len())),
        (Target::Regression(y), ModelKind::Ridge { alpha }) => Fitted::Ridge(ridge_fit(x, y, *alpha)?),
        (Target::Classes { codes, labels }, ModelKind::Ridge { alpha }) => {
            let per_class = (0..labels.len())
                .map(|c| {
                    let y: Vec<f64> = codes.iter().map(|&k| if k == c { 1.0 } else { -1.0 }).collect();
                    ridge_fit(x, &y, *alpha)
                })
                .collect::<Result<_, _>>()?;
            Fitted::RidgeClassifier(per_class)
        }
        (Target::Classes { codes, labels }, ModelKind::Logistic { l2, max_iter }) => {
            Fitted::Logistic(logistic_fit(x, codes, labels.len(), *l2, *max_iter, 1e-6)?)
        }
        (Target::Regression(_), ModelKind::Logistic { .. }) => unreachable!("rejected by supports()"),
        (target, ModelKind::Gbdt { max_depth, learning_rate, n_rounds }) => {
            let objective = match target {
                Target::Regression(_) => Objective::Squared,
                Target::Classes { labels, .. } if labels.len() == 2 => Objective::Logistic,
                Target::Classes { labels, .. } => Objective::Softmax(labels.len()),
            };
            Fitted::Gbdt(gbdt_fit(x, &target.as_f64(), objective, *max_depth, *learning_rate, *n_rounds))
        }
    };
    Ok(FittedModel { kind: kind.clone(), task, n_features_expected: x.ncols(), labels, fitted })
}

impl FittedModel {
    pub fn predict(&self, x: &Array2<f64>) -> Result<Predictions, ModelError> {
        if x.ncols() != self.n_features_expected {
            return Err(ModelError::WidthMismatch { expected: self.n_features_expected, found: x.ncols() });
        }
        check_finite(x)?;
        let n = x.nrows();
        let k = self.labels.len();
        let proba = match &self.fitted {
            Fitted::Ridge(p) => return Ok(Predictions::Values(p.predict(x).to_vec())),
            Fitted::ConstantValue(v) => return Ok(Predictions::Values(vec![*v; n])),
            Fitted::Gbdt(m) if m.objective == Objective::Squared => {
                return Ok(Predictions::Values(m.raw_scores(x).column(0).to_vec()))
            }
            Fitted::ConstantClass(c) => Array2::from_shape_fn((n, k.max(1)), |(_, j)| f64::from(j == *c)),
            Fitted::RidgeClassifier(per_class) => {
                let mut s = Array2::zeros((n, per_class.len()));
                for (c, p) in per_class.iter().enumerate() {
                    s.column_mut(c).assign(&p.predict(x));
                }
                linear::softmax_rows(&mut s);
                s
            }
            Fitted::Logistic(p) => p.predict_proba(x),
            Fitted::Gbdt(m) => {
                let mut raw = m.raw_scores(x);
                if m.objective == Objective::Logistic {
                    let mut out = Array2::zeros((n, 2));
                    for i in 0..n {
                        let p = linear::sigmoid(raw[[i, 0]]);
                        out[[i, 0]] = 1.0 - p;
                        out[[i, 1]] = p;
                    }
                    out
                } else {
                    linear::softmax_rows(&mut raw);
                    raw
                }
            }
        };
        let codes = proba
            .rows()
            .into_iter()
            .map(|r| (0..r.len()).fold(0, |best, j| if r[j] > r[best] { j } else { best }))
            .collect();
        Ok(Predictions::Classes { codes, proba: Some(proba), labels: self.labels.clone() })
    }

    /// Boosting loss history, when the model is a Gbdt.
    pub fn train_loss(&self) -> Option<&[f64]> {
        match &self.fitted {
            Fitted::Gbdt(m) => Some(&m.train_loss),
            _ => None,
        }
    }

    /// Stable textual digest of the learned parameters.
    pub fn fingerprint(&self) -> String {
        format!("{:?}", self.fitted)
    }
}

/// Fits on `train` and predicts `test`; the only entry point for
/// external models. `tables` supplies the raw fold tables for
/// raw-table external runs.
pub fn fit_predict(
    kind: &ModelKind,
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    tables: Option<(&Table, &Table)>,
) -> Result<(Predictions, Option<FittedModel>), ModelError> {
    if let ModelKind::External { command, raw_table, timeout_secs } = kind {
        kind.validate()?;
        let cmd = ExternalCommand { command, timeout: Duration::from_secs(*timeout_secs) };
        let preds = match (raw_table, tables) {
            (true, Some((tr, te))) => run_external_raw(&cmd, tr, te)?,
            (true, None) => return Err(ModelError::InvalidConfig("raw-table mode needs the fold tables".into())),
            (false, _) => run_external(&cmd, train, test)?,
        };
        return Ok((preds, None));
    }
    let model = fit(kind, train)?;
    let preds = model.predict(&test.matrix)?;
    Ok((preds, Some(model)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::Provenance;

    fn matrix(x: Array2<f64>, target: Target) -> FeatureMatrix {
        let provenance = (0..x.ncols())
            .map(|i| Provenance { source_column: format!("x{i}"), encoder: "num".into(), index: 0 })
            .collect();
        FeatureMatrix { matrix: x, provenance, target }
    }

    #[test]
    fn width_mismatch_and_empty_input() {
        let x = Array2::from_shape_fn((6, 2), |(i, j)| (i + j) as f64);
        let m = fit(&ModelKind::ridge(), &matrix(x, Target::Regression(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]))).unwrap();
        assert!(matches!(m.predict(&Array2::zeros((2, 3))), Err(ModelError::WidthMismatch { .. })));
        assert_eq!(m.predict(&Array2::zeros((0, 2))).unwrap().len(), 0);
    }

    #[test]
    fn gbdt_multiclass_probabilities() {
        let x = Array2::from_shape_fn((30, 2), |(i, j)| ((i % 3) * (j + 1)) as f64 + 0.01 * i as f64);
        let codes: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let labels = vec!["a".to_string(), "b".into(), "c".into()];
        let fm = matrix(x.clone(), Target::Classes { codes: codes.clone(), labels });
        let m = fit(&ModelKind::Gbdt { max_depth: 3, learning_rate: 0.3, n_rounds: 10 }, &fm).unwrap();
        let Predictions::Classes { codes: pred, proba: Some(p), .. } = m.predict(&x).unwrap() else { panic!() };
        assert_eq!(pred, codes);
        for r in p.rows() {
            assert!((r.sum() - 1.0).abs() < 1e-9);
        }
        let loss = m.train_loss().unwrap();
        assert!(loss.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn logistic_rejects_regression() {
        let x = Array2::zeros((3, 1));
        let err = fit(&ModelKind::logistic(), &matrix(x, Target::Regression(vec![1.0, 2.0, 3.0]))).unwrap_err();
        assert!(matches!(err, ModelError::TaskMismatch { .. }));
    }

    #[test]
    fn constant_model_predicts_majority() {
        let x = Array2::zeros((5, 1));
        let t = Target::Classes { codes: vec![1, 1, 0, 1, 0], labels: vec!["n".into(), "y".into()] };
        let m = fit(&ModelKind::Constant, &matrix(x.clone(), t)).unwrap();
        assert_eq!(m.predict(&x).unwrap().label_strings(), vec!["y"; 5]);
    }
}
