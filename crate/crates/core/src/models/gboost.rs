//! Gradient boosting on binomial deviance.
//!
//! The ensemble starts from the log-odds of the base rate. Each stage fits a
//! squared-error regression tree to the residuals `y - p` and then replaces
//! every leaf value with the one-step Newton estimate
//! `sum(y - p) / sum(p (1 - p))` over the samples in that leaf. Scores move by
//! `learning_rate` times the leaf value.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, Tree, TreeParams};
use crate::rng;
use crate::synthgen::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GboostSpec {
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub standardize: bool,
}

impl Default for GboostSpec {
    fn default() -> Self {
        Self {
            learning_rate: 0.14,
            n_estimators: 55,
            max_depth: 3,
            min_samples_split: 2,
            min_samples_leaf: 1,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    pub init_score: f64,
    pub learning_rate: f64,
    pub stages: Vec<Tree>,
    /// Mean training log-loss after 0, 1, .., n stages.
    pub train_loss: Vec<f64>,
}

pub(crate) fn log_loss(y: &[u8], scores: &[f64]) -> f64 {
    // softplus(z) - y z, computed without overflow
    let total: f64 = y
        .iter()
        .zip(scores)
        .map(|(&t, &z)| {
            let sp = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            sp - f64::from(t) * z
        })
        .sum();
    total / y.len() as f64
}

impl Booster {
    pub fn fit(spec: &GboostSpec, x: ArrayView2<'_, f64>, y: &[u8], seed: u64) -> Booster {
        let n = y.len();
        let pos = y.iter().filter(|&&v| v == 1).count() as f64;
        let base = pos / n as f64;
        let init_score = (base / (1.0 - base)).ln();
        let mut scores = vec![init_score; n];
        let mut train_loss = vec![log_loss(y, &scores)];
        let params = TreeParams {
            criterion: Criterion::SquaredError,
            max_depth: Some(spec.max_depth),
            min_samples_split: spec.min_samples_split,
            min_samples_leaf: spec.min_samples_leaf,
            max_features: None,
        };
        let mut stages = Vec::with_capacity(spec.n_estimators);
        let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        for stage in 0..spec.n_estimators {
            let prob: Vec<f64> = scores.iter().map(|&z| sigmoid(z)).collect();
            let residual: Vec<f64> = y.iter().zip(&prob).map(|(&t, &p)| f64::from(t) - p).collect();
            let mut rng = rng::substream(seed, "gboost-stage", stage as u64);
            let mut tree = Tree::fit(x, &residual, (0..n).collect(), &params, &mut rng);

            let leaf_of: Vec<usize> = rows.iter().map(|r| tree.apply(r)).collect();
            let mut num = vec![0.0; tree.nodes.len()];
            let mut den = vec![0.0; tree.nodes.len()];
            for i in 0..n {
                num[leaf_of[i]] += residual[i];
                den[leaf_of[i]] += prob[i] * (1.0 - prob[i]);
            }
            let leaves: Vec<usize> = tree.leaves().map(|(idx, _, _)| idx).collect();
            for idx in leaves {
                let v = if den[idx].abs() < 1e-150 { 0.0 } else { num[idx] / den[idx] };
                tree.set_leaf_value(idx, v);
            }
            for i in 0..n {
                scores[i] += spec.learning_rate * tree.predict(&rows[i]);
            }
            train_loss.push(log_loss(y, &scores));
            stages.push(tree);
        }
        Booster { init_score, learning_rate: spec.learning_rate, stages, train_loss }
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        self.init_score + self.learning_rate * self.stages.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }
}
