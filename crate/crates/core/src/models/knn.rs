//! Brute-force k-nearest neighbours with Minkowski distance.
//!
//! With inverse-distance weights a query that coincides with one or more
//! training rows takes the mean label of those rows.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::features::{TEAM_A_MEAN_WIN_RATE, TEAM_B_MEAN_WIN_RATE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubset {
    /// The two team-mean win-rate columns of the 44-column layout.
    TeamMeanWinRate,
    All,
}

impl FeatureSubset {
    pub fn columns(self, width: usize) -> Vec<usize> {
        match self {
            FeatureSubset::TeamMeanWinRate => vec![TEAM_A_MEAN_WIN_RATE, TEAM_B_MEAN_WIN_RATE],
            FeatureSubset::All => (0..width).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnSpec {
    pub n_neighbors: usize,
    pub p: f64,
    pub weights: Weighting,
    pub feature_subset: FeatureSubset,
    /// Tree leaf size of the reference search structure. Has no effect on
    /// predictions; the search here is exhaustive.
    pub leaf_size: usize,
    pub standardize: bool,
}

impl Default for KnnSpec {
    fn default() -> Self {
        Self {
            n_neighbors: 600,
            p: 1.0,
            weights: Weighting::Distance,
            feature_subset: FeatureSubset::TeamMeanWinRate,
            leaf_size: 5,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub p: f64,
    pub weights: Weighting,
    pub points: Array2<f64>,
    pub labels: Vec<u8>,
}

pub fn minkowski(a: &[f64], b: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    } else if p == 2.0 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    } else {
        a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

impl Knn {
    /// `points` must already be restricted to the model's columns.
    pub fn fit(spec: &KnnSpec, points: ArrayView2<'_, f64>, labels: &[u8]) -> Knn {
        Knn {
            k: spec.n_neighbors.min(labels.len()),
            p: spec.p,
            weights: spec.weights,
            points: points.to_owned(),
            labels: labels.to_vec(),
        }
    }

    /// Indices and distances of the k nearest training rows, nearest first;
    /// equal distances resolve to the lower row index.
    pub fn neighbors(&self, query: &[f64]) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = self
            .points
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| (i, minkowski(r.as_slice().expect("standard layout"), query, self.p)))
            .collect();
        let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_unstable_by(cmp);
        d
    }

    pub fn predict_proba(&self, query: &[f64]) -> f64 {
        let nn = self.neighbors(query);
        match self.weights {
            Weighting::Uniform => nn.iter().map(|&(i, _)| f64::from(self.labels[i])).sum::<f64>() / nn.len() as f64,
            Weighting::Distance => {
                let exact: Vec<usize> = nn.iter().filter(|&&(_, d)| d == 0.0).map(|&(i, _)| i).collect();
                if !exact.is_empty() {
                    return exact.iter().map(|&i| f64::from(self.labels[i])).sum::<f64>() / exact.len() as f64;
                }
                let (mut num, mut den) = (0.0, 0.0);
                for &(i, d) in &nn {
                    let w = 1.0 / d;
                    num += w * f64::from(self.labels[i]);
                    den += w;
                }
                num / den
            }
        }
    }
}
