use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::breaklab::{BreakScenario, DEFAULT_SUBSAMPLE, DEFAULT_TEST_FRACTION};
use crate::embed::EmbedderKind;
use crate::eval::ExperimentSpec;
use crate::ingest::DatasetManifest;
use crate::models::ModelKind;
use crate::select::SelectorKind;

/// A manifest file path or an inline table.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ManifestRef {
    Path(PathBuf),
    Inline(Box<DatasetManifest>),
}

fn default_embedders() -> Vec<EmbedderKind> {
    vec![EmbedderKind::tfidf()]
}
fn default_selectors() -> Vec<String> {
    vec!["none".into()]
}
fn default_models() -> Vec<ModelKind> {
    vec![ModelKind::gbdt()]
}
fn default_with_text() -> Vec<bool> {
    vec![true, false]
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

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreakConfig {
    #[serde(default = "default_synthetic")]
    pub synthetic_tables: usize,
    /// Extra binary datasets to inject into.
    #[serde(default)]
    pub manifests: Vec<ManifestRef>,
    #[serde(default = "BreakScenario::standard")]
    pub scenarios: Vec<BreakScenario>,
    #[serde(default = "default_break_embedders")]
    pub embedders: Vec<EmbedderKind>,
    #[serde(default = "ModelKind::gbdt")]
    pub model: ModelKind,
    #[serde(default = "default_subsample")]
    pub subsample: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

fn default_synthetic() -> usize {
    4
}
fn default_break_embedders() -> Vec<EmbedderKind> {
    vec![EmbedderKind::tfidf(), EmbedderKind::toy_wordvec(), EmbedderKind::hashed()]
}
fn default_subsample() -> usize {
    DEFAULT_SUBSAMPLE
}
fn default_test_fraction() -> f64 {
    DEFAULT_TEST_FRACTION
}

impl Default for BreakConfig {
    fn default() -> Self {
        BreakConfig {
            synthetic_tables: default_synthetic(),
            manifests: Vec::new(),
            scenarios: BreakScenario::standard(),
            embedders: default_break_embedders(),
            model: ModelKind::gbdt(),
            subsample: default_subsample(),
            test_fraction: default_test_fraction(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub manifests: Vec<ManifestRef>,
    #[serde(default = "default_embedders")]
    pub embedders: Vec<EmbedderKind>,
    /// Selector names; `"none"` means no downsampling.
    #[serde(default = "default_selectors")]
    pub selectors: Vec<String>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default = "default_with_text")]
    pub with_text: Vec<bool>,
    #[serde(default = "default_k_folds")]
    pub k_folds: usize,
    #[serde(default = "default_feature_cap")]
    pub feature_cap: usize,
    #[serde(default = "default_row_cap")]
    pub row_cap: usize,
    #[serde(default)]
    pub seed: u64,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    /// Report inapplicable cells as such instead of rejecting the config.
    #[serde(default)]
    pub skip_inapplicable: bool,
    #[serde(default, rename = "break")]
    pub break_lab: Option<BreakConfig>,
    /// Directory every relative path was resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn load_manifests(refs: &[ManifestRef], base: &Path) -> Result<Vec<DatasetManifest>, ConfigError> {
    refs.iter()
        .map(|r| match r {
            ManifestRef::Path(p) => {
                let mut p = p.clone();
                resolve(base, &mut p);
                DatasetManifest::from_file(&p).map_err(|e| ConfigError::Invalid(e.to_string()))
            }
            ManifestRef::Inline(m) => {
                let mut m = (**m).clone();
                resolve(base, &mut m.csv_path);
                Ok(m)
            }
        })
        .collect()
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = cfg.base_dir.clone();
        for e in cfg.embedders.iter_mut() {
            e.resolve_paths(&base);
        }
        if let Some(out) = cfg.out.as_mut() {
            resolve(&base, out);
        }
        if let Some(b) = cfg.break_lab.as_mut() {
            for e in b.embedders.iter_mut() {
                e.resolve_paths(&base);
            }
        }
        for m in cfg.models.iter_mut() {
            if let ModelKind::External { command, .. } = m {
                // Scripts shipped next to the config are made absolute.
                for arg in command.iter_mut() {
                    let candidate = base.join(&*arg);
                    if Path::new(arg).is_relative() && candidate.is_file() {
                        *arg = candidate.to_string_lossy().into_owned();
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn dataset_manifests(&self) -> Result<Vec<DatasetManifest>, ConfigError> {
        load_manifests(&self.manifests, &self.base_dir)
    }

    pub fn break_manifests(&self) -> Result<Vec<DatasetManifest>, ConfigError> {
        match &self.break_lab {
            Some(b) => load_manifests(&b.manifests, &self.base_dir),
            None => Ok(Vec::new()),
        }
    }

    pub fn selector_kinds(&self) -> Result<Vec<Option<SelectorKind>>, ConfigError> {
        self.selectors
            .iter()
            .map(|s| match s.trim() {
                "none" | "" => Ok(None),
                other => other.parse().map(Some).map_err(|e: crate::select::SelectError| ConfigError::Invalid(e.to_string())),
            })
            .collect()
    }

    /// The full grid in a fixed order, split into runnable and
    /// inapplicable cells. Fails on the first invalid cell unless
    /// `skip_inapplicable` is set (then only non-applicability is tolerated).
    pub fn expand(&self, seed: u64) -> Result<(Vec<ExperimentSpec>, Vec<ExperimentSpec>), ConfigError> {
        let manifests = self.dataset_manifests()?;
        if manifests.is_empty() {
            return Err(ConfigError::Invalid("config lists no manifests".into()));
        }
        let selectors = self.selector_kinds()?;
        let mut run = Vec::new();
        let mut skipped = Vec::new();
        for m in &manifests {
            for model in &self.models {
                for emb in &self.embedders {
                    for sel in &selectors {
                        for &with_text in &self.with_text {
                            let mut spec = ExperimentSpec::new(m.clone(), emb.clone(), model.clone(), with_text, seed);
                            spec.selector = *sel;
                            spec.k_folds = self.k_folds;
                            spec.feature_cap = self.feature_cap;
                            spec.row_cap = self.row_cap;
                            if !spec.is_applicable() && self.skip_inapplicable {
                                skipped.push(spec);
                                continue;
                            }
                            spec.validate().map_err(|e| ConfigError::Invalid(format!("{}: {e}", spec.label())))?;
                            run.push(spec);
                        }
                    }
                }
            }
        }
        Ok((run, skipped))
    }
}
