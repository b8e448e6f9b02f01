//! Binary CART trees shared by the forest and the booster.
//!
//! Both criteria reduce to sufficient statistics `(n, sum)` of the node's
//! targets: Gini on 0/1 labels maximises `(s^2 + (n - s)^2) / n` summed over
//! the children, squared error maximises `s^2 / n`. A split sends `x <= t`
//! left, where `t` is the lower of two consecutive distinct training values,
//! so any strictly increasing transform of a column yields the same partition.
//! Equal gains keep the lowest column index, then the lowest threshold.

use ndarray::ArrayView2;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    Gini,
    SquaredError,
}

impl Criterion {
    #[inline]
    fn score(self, n: f64, sum: f64) -> f64 {
        match self {
            Criterion::Gini => (sum * sum + (n - sum) * (n - sum)) / n,
            Criterion::SquaredError => sum * sum / n,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Candidate features drawn per node; `None` inspects all.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64, n_samples: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Index of the leaf `row` falls into.
    pub fn apply(&self, row: &[f64]) -> usize {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                Node::Leaf { .. } => return idx,
                Node::Split { feature, threshold, left, right } => {
                    idx = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.apply(row)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("apply returns a leaf"),
        }
    }

    pub fn set_leaf_value(&mut self, idx: usize, v: f64) {
        if let Node::Leaf { value, .. } = &mut self.nodes[idx] {
            *value = v;
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = (usize, f64, usize)> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match *n {
            Node::Leaf { value, n_samples } => Some((i, value, n_samples)),
            Node::Split { .. } => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Grow a tree on `samples` (row indices, repeats allowed). Leaves hold the
    /// mean target of their samples.
    pub(crate) fn fit(x: ArrayView2<'_, f64>, target: &[f64], samples: Vec<usize>, params: &TreeParams, rng: &mut Rng) -> Tree {
        let mut builder = Builder { x, target, params, rng, nodes: Vec::new(), buf: Vec::new() };
        builder.grow(samples, 0);
        Tree { nodes: builder.nodes }
    }
}

struct Builder<'a, 'r> {
    x: ArrayView2<'a, f64>,
    target: &'a [f64],
    params: &'a TreeParams,
    rng: &'r mut Rng,
    nodes: Vec<Node>,
    buf: Vec<(f64, f64)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_, '_> {
    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let n = samples.len();
        let sum: f64 = samples.iter().map(|&i| self.target[i]).sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: sum / n as f64, n_samples: n });

        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        let pure = match self.params.criterion {
            Criterion::Gini => sum == 0.0 || sum == n as f64,
            Criterion::SquaredError => {
                let first = self.target[samples[0]];
                samples.iter().all(|&i| self.target[i] == first)
            }
        };
        if !depth_ok || pure || n < self.params.min_samples_split || n < 2 * self.params.min_samples_leaf {
            return id;
        }
        let Some(best) = self.best_split(&samples, sum) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            samples.into_iter().partition(|&i| self.x[[i, best.feature]] <= best.threshold);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left: l, right: r };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.ncols();
        let mut feats = match self.params.max_features {
            Some(k) if k < p => index::sample(self.rng, p, k).into_vec(),
            _ => (0..p).collect(),
        };
        feats.sort_unstable();
        feats
    }

    fn best_split(&mut self, samples: &[usize], total: f64) -> Option<BestSplit> {
        let n = samples.len();
        let nf = n as f64;
        let min_leaf = self.params.min_samples_leaf.max(1);
        let crit = self.params.criterion;
        let parent = crit.score(nf, total);
        let mut best: Option<BestSplit> = None;
        for f in self.candidate_features() {
            let buf = &mut self.buf;
            buf.clear();
            buf.extend(samples.iter().map(|&i| (self.x[[i, f]], self.target[i])));
            buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if buf[0].0 == buf[n - 1].0 {
                continue;
            }
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += buf[k].1;
                let n_left = k + 1;
                if buf[k].0 == buf[k + 1].0 || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let nl = n_left as f64;
                let score = crit.score(nl, left_sum) + crit.score(nf - nl, total - left_sum);
                let gain = score - parent;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit { feature: f, threshold: buf[k].0, gain });
                }
            }
        }
        best
    }
}
