//! Stratified k-fold cross-validation, accuracy summaries and report output.

mod kfold;
mod report;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kfold::{stratified_kfold, FoldAssignment};
pub use report::{
    binomial_ci_halfwidth, emit_json, emit_markdown, parse_json, percent, summarize, CiMethod, EvaluationReport, MEAN_DECIMALS,
    SPREAD_DECIMALS, Z_95,
};

use crate::dataset::{split_indices, DatasetError};
use crate::models::{self, ModelError, ModelSpec, TrainedModel, TrainingCurve};
use crate::rng;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("k must be at least 2, got {0}")]
    BadK(usize),
    #[error("labels must be 0 or 1, got {0}")]
    BadLabel(u8),
    #[error("class {class} has {count} rows, fewer than k = {k}")]
    ClassTooSmall { class: u8, count: usize, k: usize },
    #[error("reference size for the confidence interval must be positive")]
    BadNRef,
    #[error("no reports to emit")]
    EmptyReport,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Split(#[from] DatasetError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub fn accuracy(model: &TrainedModel, x: &Array2<f64>, y: &[u8]) -> Result<f64, ModelError> {
    let p = model.predict_proba_batch(x)?;
    let hits = p.iter().zip(y).filter(|(&p, &t)| u8::from(p >= 0.5) == t).count();
    Ok(hits as f64 / y.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub accuracy: f64,
    pub n_test: usize,
    pub curve: Option<TrainingCurve>,
    pub warnings: Vec<String>,
}

/// Fit on k-1 folds and score the held-out fold, for every fold. Each fold
/// standardizes on its own training rows only. Results are in fold order.
pub fn cross_validate(spec: &ModelSpec, x: &Array2<f64>, y: &[u8], k: usize, seed: u64) -> Result<Vec<FoldResult>, EvalError> {
    let folds = stratified_kfold(y, k, seed)?;
    (0..k)
        .into_par_iter()
        .map(|f| {
            let train = folds.train_indices(f);
            let test = folds.test_indices(f);
            let pick = |idx: &[usize]| (x.select(Axis(0), idx), idx.iter().map(|&i| y[i]).collect::<Vec<u8>>());
            let (xtr, ytr) = pick(&train);
            let (xte, yte) = pick(&test);
            let model = models::fit(spec, &xtr, &ytr, rng::derive_seed(seed, "cv-fit", f as u64))?;
            Ok(FoldResult {
                fold: f,
                accuracy: accuracy(&model, &xte, &yte)?,
                n_test: test.len(),
                curve: model.meta.curve.clone(),
                warnings: model.meta.warnings.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Protocol {
    /// Cross-validate on every row.
    CvAll,
    /// Cross-validate on the training partition, then fit on that whole
    /// partition and score the held-out rows once.
    Holdout { test_fraction: f64 },
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol::Holdout { test_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k: usize,
    pub protocol: Protocol,
    pub ci: CiMethod,
    /// Rows behind the binomial interval; the whole input when unset.
    pub n_ref: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { k: 10, protocol: Protocol::default(), ci: CiMethod::Binomial, n_ref: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRun {
    pub report: EvaluationReport,
    pub folds: Vec<FoldResult>,
    /// Training curve of the final holdout fit, when the model records one.
    pub final_curve: Option<TrainingCurve>,
}

pub fn evaluate(spec: &ModelSpec, x: &Array2<f64>, y: &[u8], cfg: &EvalConfig, seed: u64) -> Result<EvaluationRun, EvalError> {
    let n_ref = cfg.n_ref.unwrap_or(y.len());
    match cfg.protocol {
        Protocol::CvAll => {
            let folds = cross_validate(spec, x, y, cfg.k, seed)?;
            let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
            let report = summarize(spec.kind().label(), &accs, n_ref, cfg.ci)?;
            Ok(EvaluationRun { report, folds, final_curve: None })
        }
        Protocol::Holdout { test_fraction } => {
            let (train, test) = split_indices(y.len(), test_fraction, seed)?;
            let pick = |idx: &[usize]| (x.select(Axis(0), idx), idx.iter().map(|&i| y[i]).collect::<Vec<u8>>());
            let (xtr, ytr) = pick(&train);
            let (xte, yte) = pick(&test);
            let folds = cross_validate(spec, &xtr, &ytr, cfg.k, seed)?;
            let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
            let mut report = summarize(spec.kind().label(), &accs, n_ref, cfg.ci)?;
            let model = models::fit(spec, &xtr, &ytr, rng::derive_seed(seed, "final-fit", 0))?;
            report.test_accuracy = Some(accuracy(&model, &xte, &yte)?);
            report.n_test = Some(test.len());
            Ok(EvaluationRun { report, folds, final_curve: model.meta.curve })
        }
    }
}
