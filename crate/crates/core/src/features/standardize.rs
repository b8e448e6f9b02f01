use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

/// Per-column z-scoring with statistics taken from the fitting rows only.
/// Columns with zero spread map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean = x.sum_axis(Axis(0)) / n;
        let mut var = Array1::zeros(x.ncols());
        for row in x.rows() {
            for (v, (&a, &m)) in var.iter_mut().zip(row.iter().zip(&mean)) {
                let d: f64 = a - m;
                *v += d * d;
            }
        }
        let std = var.mapv(|v: f64| (v / n).sqrt());
        Self { mean, std }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for (v, (&m, &s)) in row.iter_mut().zip(self.mean.iter().zip(&self.std)) {
            *v = if s > 0.0 { (*v - m) / s } else { 0.0 };
        }
    }

    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for (v, (&m, &s)) in row.iter_mut().zip(self.mean.iter().zip(&self.std)) {
                *v = if s > 0.0 { (*v - m) / s } else { 0.0 };
            }
        }
        out
    }

    pub fn inverse_transform(&self, z: &Array2<f64>) -> Array2<f64> {
        let mut out = z.clone();
        for mut row in out.rows_mut() {
            for (v, (&m, &s)) in row.iter_mut().zip(self.mean.iter().zip(&self.std)) {
                *v = m + *v * s;
            }
        }
        out
    }
}
