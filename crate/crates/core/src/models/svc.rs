//! Soft-margin support vector classifier trained with SMO.
//!
//! The dual `min 1/2 a'Qa - e'a` s.t. `y'a = 0`, `0 <= a_i <= C` is solved by
//! pairwise updates. Pairs are picked with second-order working set
//! selection; the solver stops once the maximal KKT violation `m(a) - M(a)`
//! drops below `tol`.

use std::collections::VecDeque;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::synthgen::sigmoid;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Poly,
    Rbf,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvcSpec {
    pub c: f64,
    pub kernel: KernelKind,
    pub degree: i32,
    /// Kernel scale; `None` uses `1 / (n_features * mean column variance)`.
    pub gamma: Option<f64>,
    pub coef0: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub cache_mb: usize,
    pub standardize: bool,
}

impl Default for SvcSpec {
    fn default() -> Self {
        Self {
            c: 8.0,
            kernel: KernelKind::Poly,
            degree: 3,
            gamma: None,
            coef0: 1.0,
            tol: 1e-2,
            max_iter: 1_000_000,
            cache_mb: 512,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub gamma: f64,
    pub coef0: f64,
    pub degree: i32,
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => dot(a, b),
            KernelKind::Poly => (self.gamma * dot(a, b) + self.coef0).powi(self.degree),
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-self.gamma * d2).exp()
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 / (n_features * mean column variance)`, or 1 for constant data.
pub fn scale_gamma(x: ArrayView2<'_, f64>) -> f64 {
    let var = x.var_axis(Axis(0), 0.0);
    let mean_var = var.mean().unwrap_or(0.0);
    if mean_var > 0.0 {
        1.0 / (x.ncols() as f64 * mean_var)
    } else {
        1.0
    }
}

struct RowCache<'a> {
    x: Vec<&'a [f64]>,
    kernel: Kernel,
    rows: Vec<Option<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> RowCache<'a> {
    fn new(x: Vec<&'a [f64]>, kernel: Kernel, cache_mb: usize) -> Self {
        let n = x.len();
        let per_row = (n * 8).max(1);
        let capacity = (cache_mb * 1024 * 1024 / per_row).clamp(2, n.max(2));
        Self { x, kernel, rows: vec![None; n], order: VecDeque::new(), capacity }
    }

    /// Compute row `i` if missing, never evicting row `keep`.
    fn ensure(&mut self, i: usize, keep: Option<usize>) {
        if self.rows[i].is_some() {
            return;
        }
        if self.order.len() >= self.capacity {
            if self.order.front().copied() == keep {
                self.order.rotate_left(1);
            }
            if let Some(old) = self.order.pop_front() {
                self.rows[old] = None;
            }
        }
        let xi = self.x[i];
        self.rows[i] = Some(self.x.iter().map(|xj| self.kernel.eval(xi, xj)).collect());
        self.order.push_back(i);
    }

    fn row(&self, i: usize) -> &[f64] {
        self.rows[i].as_deref().expect("row ensured before use")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svc {
    pub kernel: Kernel,
    pub support_vectors: Array2<f64>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub rho: f64,
    pub c: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Svc {
    pub fn fit(spec: &SvcSpec, x: ArrayView2<'_, f64>, labels: &[u8]) -> Svc {
        let n = labels.len();
        let gamma = spec.gamma.unwrap_or_else(|| scale_gamma(x));
        let kernel = Kernel { kind: spec.kernel, gamma, coef0: spec.coef0, degree: spec.degree };
        let rows: Vec<&[f64]> = x.rows().into_iter().map(|r| r.to_slice().expect("standard layout")).collect();
        let y: Vec<f64> = labels.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
        let diag: Vec<f64> = rows.iter().map(|r| kernel.eval(r, r)).collect();
        let mut cache = RowCache::new(rows.clone(), kernel, spec.cache_mb);
        let c = spec.c;

        let mut alpha = vec![0.0; n];
        let mut grad = vec![-1.0; n];
        let is_upper = |a: f64| a >= c;
        let is_lower = |a: f64| a <= 0.0;

        let mut iterations = 0;
        let mut converged = false;
        while iterations < spec.max_iter {
            // i: maximal violator among I_up
            let mut gmax = f64::NEG_INFINITY;
            let mut i_sel = None;
            for t in 0..n {
                let v = if y[t] > 0.0 {
                    (!is_upper(alpha[t])).then_some(-grad[t])
                } else {
                    (!is_lower(alpha[t])).then_some(grad[t])
                };
                if let Some(v) = v {
                    if v >= gmax {
                        gmax = v;
                        i_sel = Some(t);
                    }
                }
            }
            let Some(i) = i_sel else {
                converged = true;
                break;
            };
            cache.ensure(i, None);
            let ki = cache.row(i);

            // j: second-order choice among I_low
            let mut gmax2 = f64::NEG_INFINITY;
            let mut j_sel = None;
            let mut obj_min = f64::INFINITY;
            for t in 0..n {
                let (cand, grad_diff) = if y[t] > 0.0 {
                    if is_lower(alpha[t]) {
                        continue;
                    }
                    (grad[t], gmax + grad[t])
                } else {
                    if is_upper(alpha[t]) {
                        continue;
                    }
                    (-grad[t], gmax - grad[t])
                };
                if cand >= gmax2 {
                    gmax2 = cand;
                }
                if grad_diff > 0.0 {
                    let quad = diag[i] + diag[t] - 2.0 * ki[t];
                    let quad = if quad > 0.0 { quad } else { TAU };
                    let obj = -(grad_diff * grad_diff) / quad;
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = Some(t);
                    }
                }
            }
            if gmax + gmax2 < spec.tol {
                converged = true;
                break;
            }
            let Some(j) = j_sel else {
                converged = true;
                break;
            };
            iterations += 1;
            cache.ensure(j, Some(i));

            let q_ij = y[i] * y[j] * cache.row(i)[j];
            let (old_i, old_j) = (alpha[i], alpha[j]);
            if y[i] != y[j] {
                let quad = diag[i] + diag[j] + 2.0 * q_ij;
                let quad = if quad > 0.0 { quad } else { TAU };
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = diag[i] + diag[j] - 2.0 * q_ij;
                let quad = if quad > 0.0 { quad } else { TAU };
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }

            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            let (ki, kj) = (cache.row(i), cache.row(j));
            for t in 0..n {
                grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
            }
        }

        // offset from free vectors, else the midpoint of the feasible interval
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut n_free, mut sum_free) = (0usize, 0.0);
        for t in 0..n {
            let yg = y[t] * grad[t];
            if is_upper(alpha[t]) {
                if y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if is_lower(alpha[t]) {
                if y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        let rho = if n_free > 0 { sum_free / n_free as f64 } else { 0.5 * (ub + lb) };

        let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
        Svc {
            kernel,
            support_vectors: x.select(Axis(0), &sv),
            dual_coef: sv.iter().map(|&t| alpha[t] * y[t]).collect(),
            rho,
            c,
            iterations,
            converged,
        }
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        self.support_vectors
            .rows()
            .into_iter()
            .zip(&self.dual_coef)
            .map(|(sv, &a)| a * self.kernel.eval(sv.as_slice().expect("standard layout"), row))
            .sum::<f64>()
            - self.rho
    }

    /// Logistic squash of the decision value; 0.5 sits on the boundary.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }

    /// Dual variables `alpha_i` of the support vectors.
    pub fn alphas(&self) -> impl Iterator<Item = f64> + '_ {
        self.dual_coef.iter().map(|a| a.abs())
    }
}
