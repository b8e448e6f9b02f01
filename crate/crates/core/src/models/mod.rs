//! Five classifier families behind a single fit / predict contract.

pub mod dnn;
pub mod forest;
pub mod gboost;
pub mod knn;
pub mod svc;
pub mod tree;

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dnn::{Dnn, DnnSpec, EpochStats, LayerOrder, TrainingCurve};
pub use forest::{Forest, RfSpec};
pub use gboost::{Booster, GboostSpec};
pub use knn::{FeatureSubset, Knn, KnnSpec, Weighting};
pub use svc::{KernelKind, Svc, SvcSpec};

use crate::features::Standardizer;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("labels must be 0 or 1, got {0}")]
    BadLabel(u8),
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("expected {expected} feature columns, got {got}")]
    Width { expected: usize, got: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidSpec(String),
    #[error("model artifact format {0} is not supported")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Svc,
    Knn,
    Rf,
    Gboost,
    Dnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::Svc, ModelKind::Knn, ModelKind::Rf, ModelKind::Gboost, ModelKind::Dnn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Svc => "svc",
            ModelKind::Knn => "knn",
            ModelKind::Rf => "rf",
            ModelKind::Gboost => "gboost",
            ModelKind::Dnn => "dnn",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Svc => "SVC",
            ModelKind::Knn => "kNN",
            ModelKind::Rf => "RF",
            ModelKind::Gboost => "GBOOST",
            ModelKind::Dnn => "DNN",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Svc(SvcSpec),
    Knn(KnnSpec),
    Rf(RfSpec),
    Gboost(GboostSpec),
    Dnn(DnnSpec),
}

impl ModelSpec {
    pub fn default_for(kind: ModelKind) -> ModelSpec {
        match kind {
            ModelKind::Svc => ModelSpec::Svc(SvcSpec::default()),
            ModelKind::Knn => ModelSpec::Knn(KnnSpec::default()),
            ModelKind::Rf => ModelSpec::Rf(RfSpec::default()),
            ModelKind::Gboost => ModelSpec::Gboost(GboostSpec::default()),
            ModelKind::Dnn => ModelSpec::Dnn(DnnSpec::default()),
        }
    }

    /// Hyperparameters for `kind` from a JSON object of overrides.
    pub fn from_json(kind: ModelKind, value: serde_json::Value) -> Result<ModelSpec, ModelError> {
        Ok(match kind {
            ModelKind::Svc => ModelSpec::Svc(serde_json::from_value(value)?),
            ModelKind::Knn => ModelSpec::Knn(serde_json::from_value(value)?),
            ModelKind::Rf => ModelSpec::Rf(serde_json::from_value(value)?),
            ModelKind::Gboost => ModelSpec::Gboost(serde_json::from_value(value)?),
            ModelKind::Dnn => ModelSpec::Dnn(serde_json::from_value(value)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Svc(_) => ModelKind::Svc,
            ModelSpec::Knn(_) => ModelKind::Knn,
            ModelSpec::Rf(_) => ModelKind::Rf,
            ModelSpec::Gboost(_) => ModelKind::Gboost,
            ModelSpec::Dnn(_) => ModelKind::Dnn,
        }
    }

    pub fn standardize(&self) -> bool {
        match self {
            ModelSpec::Svc(s) => s.standardize,
            ModelSpec::Knn(s) => s.standardize,
            ModelSpec::Rf(s) => s.standardize,
            ModelSpec::Gboost(s) => s.standardize,
            ModelSpec::Dnn(s) => s.standardize,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidSpec(msg.to_string()));
        match self {
            ModelSpec::Svc(s) => {
                if !(s.c > 0.0) {
                    return bad("svc c must be positive");
                }
                if !(s.tol > 0.0) {
                    return bad("svc tol must be positive");
                }
                if s.gamma.is_some_and(|g| !(g > 0.0)) {
                    return bad("svc gamma must be positive");
                }
                if s.max_iter == 0 {
                    return bad("svc max_iter must be at least 1");
                }
            }
            ModelSpec::Knn(s) => {
                if s.n_neighbors == 0 {
                    return bad("knn n_neighbors must be at least 1");
                }
                if !(s.p >= 1.0) {
                    return bad("knn p must be at least 1");
                }
            }
            ModelSpec::Rf(s) => {
                if s.n_estimators == 0 || s.max_features == 0 || s.min_samples_leaf == 0 || s.min_samples_split < 2 {
                    return bad("rf needs n_estimators, max_features, min_samples_leaf >= 1 and min_samples_split >= 2");
                }
            }
            ModelSpec::Gboost(s) => {
                if !(s.learning_rate > 0.0) || s.max_depth == 0 || s.min_samples_leaf == 0 || s.min_samples_split < 2 {
                    return bad("gboost needs learning_rate > 0, max_depth >= 1, min_samples_leaf >= 1, min_samples_split >= 2");
                }
            }
            ModelSpec::Dnn(s) => {
                if !(0.0..1.0).contains(&s.dropout_rate) {
                    return bad("dnn dropout_rate must lie in [0,1)");
                }
                if !(0.0..1.0).contains(&s.validation_fraction) {
                    return bad("dnn validation_fraction must lie in [0,1)");
                }
                if s.batch_size == 0 || s.hidden.contains(&0) {
                    return bad("dnn batch_size and layer widths must be positive");
                }
                if !(s.learning_rate > 0.0) || !(s.bn_epsilon > 0.0) || !(0.0..1.0).contains(&s.bn_momentum) {
                    return bad("dnn learning_rate, bn_epsilon must be positive and bn_momentum in [0,1)");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Fitted {
    Svc(Svc),
    Knn(Knn),
    Rf(Forest),
    Gboost(Booster),
    Dnn(Dnn),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub n_train: usize,
    pub warnings: Vec<String>,
    pub epochs_run: Option<usize>,
    pub best_epoch: Option<usize>,
    /// `early_stopping` or `epochs_exhausted` for the network.
    pub stop_reason: Option<String>,
    pub curve: Option<TrainingCurve>,
    pub oob_accuracy: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub seed: u64,
    /// Width of the rows passed to `predict_proba`.
    pub n_features: usize,
    /// Columns of the input row the model actually reads.
    pub columns: Vec<usize>,
    pub standardizer: Option<Standardizer>,
    pub fitted: Fitted,
    pub meta: TrainingMeta,
}

fn check_finite(x: ArrayView2<'_, f64>) -> Result<(), ModelError> {
    for ((row, col), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(ModelError::NonFinite { row, col });
        }
    }
    Ok(())
}

/// Train one model. Deterministic in `(spec, x, y, seed)`.
pub fn fit(spec: &ModelSpec, x: &Array2<f64>, y: &[u8], seed: u64) -> Result<TrainedModel, ModelError> {
    spec.validate()?;
    if x.nrows() != y.len() {
        return Err(ModelError::LengthMismatch { rows: x.nrows(), labels: y.len() });
    }
    if y.len() < 2 {
        return Err(ModelError::TooFewRows(y.len()));
    }
    if let Some(&b) = y.iter().find(|&&v| v > 1) {
        return Err(ModelError::BadLabel(b));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(ModelError::SingleClass);
    }
    check_finite(x.view())?;

    let n_features = x.ncols();
    let columns: Vec<usize> = match spec {
        ModelSpec::Knn(k) => k.feature_subset.columns(n_features),
        _ => (0..n_features).collect(),
    };
    if let Some(&c) = columns.iter().find(|&&c| c >= n_features) {
        return Err(ModelError::Width { expected: c + 1, got: n_features });
    }
    if columns.is_empty() {
        return Err(ModelError::Width { expected: 1, got: 0 });
    }
    let sub = x.select(Axis(1), &columns).as_standard_layout().into_owned();
    let standardizer = spec.standardize().then(|| Standardizer::fit(&sub));
    let xs = match &standardizer {
        Some(s) => s.transform(&sub),
        None => sub,
    };

    let mut meta = TrainingMeta { n_train: y.len(), ..TrainingMeta::default() };
    let fitted = match spec {
        ModelSpec::Svc(s) => {
            let m = Svc::fit(s, xs.view(), y);
            if !m.converged {
                let w = format!("svc reached the iteration cap ({}) before meeting tol {}", s.max_iter, s.tol);
                log::warn!("{w}");
                meta.warnings.push(w);
            }
            meta.converged = Some(m.converged);
            meta.iterations = Some(m.iterations);
            Fitted::Svc(m)
        }
        ModelSpec::Knn(s) => {
            let m = Knn::fit(s, xs.view(), y);
            if m.k < s.n_neighbors {
                let w = format!("knn n_neighbors {} clamped to training size {}", s.n_neighbors, m.k);
                log::warn!("{w}");
                meta.warnings.push(w);
            }
            Fitted::Knn(m)
        }
        ModelSpec::Rf(s) => {
            if s.max_features > xs.ncols() {
                let w = format!("rf max_features {} exceeds {} columns; using all", s.max_features, xs.ncols());
                log::warn!("{w}");
                meta.warnings.push(w);
            }
            let m = Forest::fit(s, xs.view(), y, seed);
            meta.oob_accuracy = m.oob_accuracy;
            Fitted::Rf(m)
        }
        ModelSpec::Gboost(s) => Fitted::Gboost(Booster::fit(s, xs.view(), y, seed)),
        ModelSpec::Dnn(s) => {
            let m = Dnn::fit(s, xs.view(), y, seed);
            meta.epochs_run = Some(m.epochs_run);
            meta.best_epoch = Some(m.best_epoch);
            meta.stop_reason = Some(if m.stopped_early { "early_stopping" } else { "epochs_exhausted" }.to_string());
            meta.curve = Some(m.curve.clone());
            Fitted::Dnn(m)
        }
    };
    Ok(TrainedModel { format_version: FORMAT_VERSION, spec: spec.clone(), seed, n_features, columns, standardizer, fitted, meta })
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    fn prepare(&self, row: &[f64]) -> Result<Vec<f64>, ModelError> {
        if row.len() != self.n_features {
            return Err(ModelError::Width { expected: self.n_features, got: row.len() });
        }
        if let Some(col) = row.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { row: 0, col });
        }
        let mut sub: Vec<f64> = self.columns.iter().map(|&c| row[c]).collect();
        if let Some(s) = &self.standardizer {
            s.transform_row(&mut sub);
        }
        Ok(sub)
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<f64, ModelError> {
        let z = self.prepare(row)?;
        let p = match &self.fitted {
            Fitted::Svc(m) => m.predict_proba(&z),
            Fitted::Knn(m) => m.predict_proba(&z),
            Fitted::Rf(m) => m.predict_proba(&z),
            Fitted::Gboost(m) => m.predict_proba(&z),
            Fitted::Dnn(m) => m.predict_proba(&z),
        };
        Ok(p.clamp(0.0, 1.0))
    }

    pub fn predict_proba_batch(&self, x: &Array2<f64>) -> Result<Vec<f64>, ModelError> {
        if x.ncols() != self.n_features {
            return Err(ModelError::Width { expected: self.n_features, got: x.ncols() });
        }
        if let Fitted::Dnn(m) = &self.fitted {
            check_finite(x.view())?;
            let mut sub = x.select(Axis(1), &self.columns);
            if let Some(s) = &self.standardizer {
                sub = s.transform(&sub);
            }
            return Ok(m.predict_proba_batch(sub.view()));
        }
        x.rows().into_iter().map(|r| self.predict_proba(&r.to_vec())).collect()
    }

    pub fn predict(&self, row: &[f64]) -> Result<u8, ModelError> {
        Ok(u8::from(self.predict_proba(row)? >= 0.5))
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainedModel, ModelError> {
        let m: TrainedModel = serde_json::from_slice(&fs::read(path)?)?;
        if m.format_version != FORMAT_VERSION {
            return Err(ModelError::Version(m.format_version));
        }
        Ok(m)
    }
}
