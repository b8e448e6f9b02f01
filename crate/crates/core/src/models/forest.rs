//! Bagged CART forest with Gini splits and per-node feature subsampling.

use ndarray::ArrayView2;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, Tree, TreeParams};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfSpec {
    pub n_estimators: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub max_features: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub standardize: bool,
}

impl Default for RfSpec {
    fn default() -> Self {
        Self {
            n_estimators: 350,
            min_samples_leaf: 3,
            min_samples_split: 10,
            max_features: 7,
            max_depth: None,
            bootstrap: true,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// Accuracy over rows left out of at least one bootstrap sample.
    pub oob_accuracy: Option<f64>,
}

fn vote(leaf_fraction: f64) -> f64 {
    if leaf_fraction > 0.5 {
        1.0
    } else if leaf_fraction < 0.5 {
        0.0
    } else {
        0.5
    }
}

impl Forest {
    pub fn fit(spec: &RfSpec, x: ArrayView2<'_, f64>, y: &[u8], seed: u64) -> Forest {
        let n = y.len();
        let target: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let params = TreeParams {
            criterion: Criterion::Gini,
            max_depth: spec.max_depth,
            min_samples_split: spec.min_samples_split,
            min_samples_leaf: spec.min_samples_leaf,
            max_features: Some(spec.max_features),
        };
        let grown: Vec<(Tree, Vec<bool>)> = (0..spec.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng::substream(seed, "rf-tree", t as u64);
                let mut in_bag = vec![!spec.bootstrap; n];
                let samples: Vec<usize> = if spec.bootstrap {
                    (0..n)
                        .map(|_| {
                            let i = rng.random_range(0..n);
                            in_bag[i] = true;
                            i
                        })
                        .collect()
                } else {
                    (0..n).collect()
                };
                (Tree::fit(x, &target, samples, &params, &mut rng), in_bag)
            })
            .collect();

        let oob_accuracy = spec.bootstrap.then(|| {
            let (mut correct, mut counted) = (0usize, 0usize);
            for (i, row) in x.rows().into_iter().enumerate() {
                let row = row.to_vec();
                let (mut votes, mut k) = (0.0, 0usize);
                for (tree, in_bag) in &grown {
                    if !in_bag[i] {
                        votes += vote(tree.predict(&row));
                        k += 1;
                    }
                }
                if k > 0 {
                    counted += 1;
                    let p = votes / k as f64;
                    if u8::from(p >= 0.5) == y[i] {
                        correct += 1;
                    }
                }
            }
            (counted > 0).then(|| correct as f64 / counted as f64)
        });

        Forest { trees: grown.into_iter().map(|(t, _)| t).collect(), oob_accuracy: oob_accuracy.flatten() }
    }

    /// Mean of the trees' class votes.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| vote(t.predict(row))).sum::<f64>() / self.trees.len() as f64
    }
}
