//! Population moment summaries over one team's five values.
//!
//! Moments are the biased (population) forms: `m_k = mean((x - mean)^k)`,
//! `skewness = m3 / m2^1.5`, `excess_kurtosis = m4 / m2^2 - 3`. When
//! `m2 == 0` both shape statistics are defined as 0.

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::dataset::TEAM_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub mean: f64,
    pub median: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl StatSummary {
    /// Values in feature-column order: mean, median, std, variance, skewness, excess kurtosis.
    pub fn columns(&self) -> [f64; 6] {
        [self.mean, self.median, self.std_dev, self.variance, self.skewness, self.excess_kurtosis]
    }
}

pub const SUMMARY_COLUMNS: [&str; 6] = ["mean", "median", "std", "variance", "skewness", "excess_kurtosis"];

/// Summary of exactly one team's values.
pub fn summary_stats(values: &[f64]) -> Result<StatSummary, FeatureError> {
    if values.len() != TEAM_SIZE {
        return Err(FeatureError::Arity { expected: TEAM_SIZE, got: values.len() });
    }
    Ok(moments(values))
}

/// Same statistics for any non-empty slice.
pub(crate) fn moments(values: &[f64]) -> StatSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in values {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    StatSummary {
        mean,
        median: median(values),
        variance: m2,
        std_dev: m2.sqrt(),
        skewness,
        excess_kurtosis,
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}
