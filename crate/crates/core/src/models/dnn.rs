//! Pyramid feed-forward network with dropout, batch normalization and ELU.
//!
//! The default stack repeats `dropout -> batch norm -> dense(ELU, He init)`
//! for widths 160, 128, 64, 32, 16 and ends in a single sigmoid unit. The
//! network is trained on binary cross-entropy with Adam, mini-batches and
//! early stopping on a held-out slice of the training rows.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::rng::{self, Rng};
use crate::synthgen::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerOrder {
    /// dropout -> batch norm -> dense with ELU
    DropoutNormDense,
    /// dense -> batch norm -> ELU -> dropout
    DenseNormDropout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DnnSpec {
    pub hidden: Vec<usize>,
    pub dropout_rate: f64,
    pub layer_order: LayerOrder,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
    pub restore_best: bool,
    pub standardize: bool,
}

impl Default for DnnSpec {
    fn default() -> Self {
        Self {
            hidden: vec![160, 128, 64, 32, 16],
            dropout_rate: 0.69,
            layer_order: LayerOrder::DropoutNormDense,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-7,
            batch_size: 32,
            max_epochs: 200,
            patience: 20,
            validation_fraction: 0.1,
            bn_momentum: 0.99,
            bn_epsilon: 1e-3,
            restore_best: true,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Dropout { rate: f64 },
    BatchNorm {
        gamma: Array1<f64>,
        beta: Array1<f64>,
        running_mean: Array1<f64>,
        running_var: Array1<f64>,
        momentum: f64,
        eps: f64,
    },
    Dense { w: Array2<f64>, b: Array1<f64> },
    Elu,
}

impl Layer {
    fn n_params(&self) -> usize {
        match self {
            Layer::BatchNorm { gamma, beta, .. } => gamma.len() + beta.len(),
            Layer::Dense { w, b } => w.len() + b.len(),
            Layer::Dropout { .. } | Layer::Elu => 0,
        }
    }
}

pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// Which stochastic / batch-dependent behaviour a forward pass uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mode {
    pub dropout: bool,
    pub batch_stats: bool,
}

impl Mode {
    pub const TRAIN: Mode = Mode { dropout: true, batch_stats: true };
    pub const INFER: Mode = Mode { dropout: false, batch_stats: false };
}

enum Cache {
    None,
    Mask(Array2<f64>),
    Norm { x_hat: Array2<f64>, inv_std: Array1<f64>, batch: bool },
    Input(Array2<f64>),
}

/// Per-parameter-tensor gradients in [`Network::param_slices_mut`] order.
pub type Grads = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(spec: &DnnSpec, n_inputs: usize, rng: &mut Rng) -> Network {
        let bn = |d: usize| Layer::BatchNorm {
            gamma: Array1::ones(d),
            beta: Array1::zeros(d),
            running_mean: Array1::zeros(d),
            running_var: Array1::ones(d),
            momentum: spec.bn_momentum,
            eps: spec.bn_epsilon,
        };
        let mut layers = Vec::new();
        let mut width = n_inputs;
        for &h in &spec.hidden {
            let he = Normal::new(0.0, (2.0 / width as f64).sqrt()).expect("positive std");
            let dense = Layer::Dense { w: Array2::from_shape_fn((width, h), |_| he.sample(rng)), b: Array1::zeros(h) };
            let dropout = Layer::Dropout { rate: spec.dropout_rate };
            match spec.layer_order {
                LayerOrder::DropoutNormDense => layers.extend([dropout, bn(width), dense, Layer::Elu]),
                LayerOrder::DenseNormDropout => layers.extend([dense, bn(h), Layer::Elu, dropout]),
            }
            width = h;
        }
        let limit = (6.0 / (width as f64 + 1.0)).sqrt();
        let glorot = Uniform::new_inclusive(-limit, limit).expect("valid range");
        layers.push(Layer::Dense { w: Array2::from_shape_fn((width, 1), |_| glorot.sample(rng)), b: Array1::zeros(1) });
        Network { layers }
    }

    pub fn n_inputs(&self) -> usize {
        self.layers
            .iter()
            .find_map(|l| match l {
                Layer::Dense { w, .. } => Some(w.nrows()),
                Layer::BatchNorm { gamma, .. } => Some(gamma.len()),
                _ => None,
            })
            .unwrap_or(0)
    }

    pub fn dense_param_count(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, Layer::Dense { .. })).map(Layer::n_params).sum()
    }

    pub fn norm_param_count(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, Layer::BatchNorm { .. })).map(Layer::n_params).sum()
    }

    /// Mutable views of every trainable tensor: dense `w`, `b` and
    /// batch-norm `gamma`, `beta`, in layer order.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            match l {
                Layer::Dense { w, b } => {
                    out.push(w.as_slice_mut().expect("standard layout"));
                    out.push(b.as_slice_mut().expect("standard layout"));
                }
                Layer::BatchNorm { gamma, beta, .. } => {
                    out.push(gamma.as_slice_mut().expect("standard layout"));
                    out.push(beta.as_slice_mut().expect("standard layout"));
                }
                Layer::Dropout { .. } | Layer::Elu => {}
            }
        }
        out
    }

    /// Output logits. In batch-stats mode running averages are updated.
    fn forward(&mut self, x: ArrayView2<'_, f64>, mode: Mode, rng: &mut Rng, caches: Option<&mut Vec<Cache>>) -> Array2<f64> {
        let mut keep = caches;
        if let Some(c) = keep.as_deref_mut() {
            c.clear();
        }
        let mut a = x.to_owned();
        for layer in &mut self.layers {
            let (out, cache) = match layer {
                Layer::Dropout { rate } => {
                    if mode.dropout && *rate > 0.0 {
                        let scale = 1.0 / (1.0 - *rate);
                        let mask = Array2::from_shape_fn(a.raw_dim(), |_| if rng.random::<f64>() >= *rate { scale } else { 0.0 });
                        (&a * &mask, Cache::Mask(mask))
                    } else {
                        (a, Cache::None)
                    }
                }
                Layer::BatchNorm { gamma, beta, running_mean, running_var, momentum, eps } => {
                    if mode.batch_stats {
                        let mean = a.mean_axis(Axis(0)).expect("non-empty batch");
                        let var = a.var_axis(Axis(0), 0.0);
                        running_mean.zip_mut_with(&mean, |r, &m| *r = *momentum * *r + (1.0 - *momentum) * m);
                        running_var.zip_mut_with(&var, |r, &v| *r = *momentum * *r + (1.0 - *momentum) * v);
                        let inv_std = var.mapv(|v| 1.0 / (v + *eps).sqrt());
                        let x_hat = (&a - &mean) * &inv_std;
                        (&x_hat * &*gamma + &*beta, Cache::Norm { x_hat, inv_std, batch: true })
                    } else {
                        let inv_std = running_var.mapv(|v| 1.0 / (v + *eps).sqrt());
                        let x_hat = (&a - &*running_mean) * &inv_std;
                        (&x_hat * &*gamma + &*beta, Cache::Norm { x_hat, inv_std, batch: false })
                    }
                }
                Layer::Dense { w, b } => (a.dot(&*w) + &*b, Cache::Input(a)),
                Layer::Elu => (a.mapv(elu), Cache::Input(a)),
            };
            if let Some(c) = keep.as_deref_mut() {
                c.push(cache);
            }
            a = out;
        }
        a
    }

    /// Backpropagate `d_out` (gradient w.r.t. the logits) through cached activations.
    fn backward(&self, caches: &[Cache], d_out: Array2<f64>) -> Grads {
        let mut grads: Vec<Vec<f64>> = Vec::new();
        let mut d = d_out;
        for (layer, cache) in self.layers.iter().zip(caches).rev() {
            match (layer, cache) {
                (Layer::Dropout { .. }, Cache::Mask(mask)) => d *= mask,
                (Layer::Dropout { .. }, _) => {}
                (Layer::BatchNorm { gamma, .. }, Cache::Norm { x_hat, inv_std, batch }) => {
                    let d_gamma = (&d * x_hat).sum_axis(Axis(0));
                    let d_beta = d.sum_axis(Axis(0));
                    let d_xhat = &d * gamma;
                    d = if *batch {
                        let m = d.nrows() as f64;
                        let sum_dxhat = d_xhat.sum_axis(Axis(0));
                        let sum_dxhat_xhat = (&d_xhat * x_hat).sum_axis(Axis(0));
                        let mut dx = &d_xhat * m - &sum_dxhat - &(x_hat * &sum_dxhat_xhat);
                        dx *= &(inv_std / m);
                        dx
                    } else {
                        d_xhat * inv_std
                    };
                    grads.push(d_beta.to_vec());
                    grads.push(d_gamma.to_vec());
                }
                (Layer::Dense { w, .. }, Cache::Input(input)) => {
                    let dw = input.t().dot(&d);
                    let db = d.sum_axis(Axis(0));
                    d = d.dot(&w.t());
                    grads.push(db.to_vec());
                    grads.push(dw.iter().copied().collect());
                }
                (Layer::Elu, Cache::Input(input)) => {
                    d.zip_mut_with(input, |g, &x| *g *= elu_grad(x));
                }
                _ => unreachable!("cache kind matches layer kind"),
            }
        }
        grads.reverse();
        grads
    }

    /// Mean binary cross-entropy and its gradient for one batch.
    pub fn loss_and_grads(&mut self, x: ArrayView2<'_, f64>, y: &[u8], mode: Mode, rng: &mut Rng) -> (f64, Grads, Array1<f64>) {
        let mut caches = Vec::with_capacity(self.layers.len());
        let logits = self.forward(x, mode, rng, Some(&mut caches)).column(0).to_owned();
        let m = y.len() as f64;
        let loss = bce(&logits, y);
        let d_out = Array2::from_shape_fn((y.len(), 1), |(i, _)| (sigmoid(logits[i]) - f64::from(y[i])) / m);
        let grads = self.backward(&caches, d_out);
        (loss, grads, logits)
    }

    /// Loss without touching running statistics.
    pub fn loss(&self, x: ArrayView2<'_, f64>, y: &[u8], mode: Mode, rng: &mut Rng) -> f64 {
        let mut scratch = self.clone();
        let logits = scratch.forward(x, mode, rng, None).column(0).to_owned();
        bce(&logits, y)
    }

    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        let mut scratch = self.clone();
        let mut unused = rng::rng_from(0);
        scratch.forward(x, Mode::INFER, &mut unused, None).column(0).to_owned()
    }

    /// Logits in an arbitrary mode on a scratch copy (running stats untouched).
    pub fn logits_in_mode(&self, x: ArrayView2<'_, f64>, mode: Mode, rng: &mut Rng) -> Array1<f64> {
        let mut scratch = self.clone();
        scratch.forward(x, mode, rng, None).column(0).to_owned()
    }
}

fn bce(logits: &Array1<f64>, y: &[u8]) -> f64 {
    let total: f64 = logits
        .iter()
        .zip(y)
        .map(|(&z, &t)| {
            let sp = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            sp - f64::from(t) * z
        })
        .sum();
    total / y.len() as f64
}

fn accuracy(logits: &Array1<f64>, y: &[u8]) -> f64 {
    let hits = logits.iter().zip(y).filter(|(&z, &t)| u8::from(sigmoid(z) >= 0.5) == t).count();
    hits as f64 / y.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub epochs: Vec<EpochStats>,
}

impl TrainingCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{},{},{}\n", e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dnn {
    pub network: Network,
    pub curve: TrainingCurve,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

struct Adam {
    m: Grads,
    v: Grads,
    t: i32,
}

impl Adam {
    fn new(net: &mut Network) -> Self {
        let shapes: Vec<usize> = net.param_slices_mut().iter().map(|s| s.len()).collect();
        Self { m: shapes.iter().map(|&n| vec![0.0; n]).collect(), v: shapes.iter().map(|&n| vec![0.0; n]).collect(), t: 0 }
    }

    fn step(&mut self, spec: &DnnSpec, net: &mut Network, grads: &Grads) {
        self.t += 1;
        let c1 = 1.0 - spec.beta1.powi(self.t);
        let c2 = 1.0 - spec.beta2.powi(self.t);
        for (((p, g), m), v) in net.param_slices_mut().into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for k in 0..p.len() {
                m[k] = spec.beta1 * m[k] + (1.0 - spec.beta1) * g[k];
                v[k] = spec.beta2 * v[k] + (1.0 - spec.beta2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= spec.learning_rate * m_hat / (v_hat.sqrt() + spec.adam_epsilon);
            }
        }
    }
}

impl Dnn {
    pub fn fit(spec: &DnnSpec, x: ArrayView2<'_, f64>, y: &[u8], seed: u64) -> Dnn {
        let mut init_rng = rng::substream(seed, "dnn-init", 0);
        let mut net = Network::new(spec, x.ncols(), &mut init_rng);

        let n = y.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::substream(seed, "dnn-val", 0));
        let n_val = if n >= 2 { ((spec.validation_fraction * n as f64).round() as usize).min(n - 1) } else { 0 };
        let (val_idx, train_idx) = order.split_at(n_val);
        let mut train_idx = train_idx.to_vec();
        let val_x = x.select(Axis(0), val_idx);
        let val_y: Vec<u8> = val_idx.iter().map(|&i| y[i]).collect();

        let mut adam = Adam::new(&mut net);
        let mut drop_rng = rng::substream(seed, "dnn-dropout", 0);
        let mut shuffle_rng = rng::substream(seed, "dnn-shuffle", 0);
        let mut curve = TrainingCurve::default();
        let mut best = (f64::INFINITY, 0usize, net.clone());
        let mut since_best = 0;
        let mut stopped_early = false;
        let batch = spec.batch_size.max(1);

        for epoch in 0..spec.max_epochs {
            train_idx.shuffle(&mut shuffle_rng);
            let (mut loss_sum, mut hits) = (0.0, 0usize);
            for chunk in train_idx.chunks(batch) {
                let bx = x.select(Axis(0), chunk);
                let by: Vec<u8> = chunk.iter().map(|&i| y[i]).collect();
                let (loss, grads, logits) = net.loss_and_grads(bx.view(), &by, Mode::TRAIN, &mut drop_rng);
                loss_sum += loss * chunk.len() as f64;
                hits += logits.iter().zip(&by).filter(|(&z, &t)| u8::from(z >= 0.0) == t).count();
                adam.step(spec, &mut net, &grads);
            }
            let n_train = train_idx.len().max(1) as f64;
            let (val_loss, val_acc) = if n_val > 0 {
                let logits = net.logits(val_x.view());
                (bce(&logits, &val_y), accuracy(&logits, &val_y))
            } else {
                (f64::NAN, f64::NAN)
            };
            curve.epochs.push(EpochStats { epoch: epoch + 1, train_loss: loss_sum / n_train, train_acc: hits as f64 / n_train, val_loss, val_acc });

            if n_val == 0 {
                continue;
            }
            if val_loss < best.0 {
                best = (val_loss, epoch + 1, net.clone());
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= spec.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
        let epochs_run = curve.epochs.len();
        let best_epoch = if n_val > 0 { best.1 } else { epochs_run };
        if spec.restore_best && n_val > 0 {
            net = best.2;
        }
        Dnn { network: net, curve, epochs_run, best_epoch, stopped_early }
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let x = Array2::from_shape_vec((1, row.len()), row.to_vec()).expect("row shape");
        sigmoid(self.network.logits(x.view())[0])
    }

    pub fn predict_proba_batch(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        // chunked so the scratch copy stays small
        let mut out = Vec::with_capacity(x.nrows());
        let mut start = 0;
        while start < x.nrows() {
            let end = (start + 1024).min(x.nrows());
            out.extend(self.network.logits(x.slice(s![start..end, ..])).iter().map(|&z| sigmoid(z)));
            start = end;
        }
        out
    }
}

/// Worst relative error between analytic and central-difference gradients
/// for one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub tensor: usize,
    pub layer: usize,
    pub name: &'static str,
    pub checked: usize,
    pub max_rel_error: f64,
}

/// Compare backprop against `(L(p + eps) - L(p - eps)) / 2 eps` in the
/// deterministic mode (dropout off, running normalization statistics).
/// At most `per_tensor` entries of each tensor are probed, spread evenly.
pub fn gradient_check(net: &Network, x: ArrayView2<'_, f64>, y: &[u8], eps: f64, per_tensor: usize) -> Vec<GradientCheck> {
    let mut unused = rng::rng_from(0);
    let mut work = net.clone();
    let (_, grads, _) = work.loss_and_grads(x, y, Mode::INFER, &mut unused);
    let mut names = Vec::new();
    for (li, l) in net.layers.iter().enumerate() {
        match l {
            Layer::Dense { .. } => names.extend([(li, "dense.w"), (li, "dense.b")]),
            Layer::BatchNorm { .. } => names.extend([(li, "norm.gamma"), (li, "norm.beta")]),
            _ => {}
        }
    }
    let mut out = Vec::new();
    for (t, g) in grads.iter().enumerate() {
        let stride = g.len().div_ceil(per_tensor.max(1)).max(1);
        let mut worst = 0.0f64;
        let mut checked = 0;
        for k in (0..g.len()).step_by(stride) {
            let orig = work.param_slices_mut()[t][k];
            work.param_slices_mut()[t][k] = orig + eps;
            let up = work.loss(x, y, Mode::INFER, &mut unused);
            work.param_slices_mut()[t][k] = orig - eps;
            let down = work.loss(x, y, Mode::INFER, &mut unused);
            work.param_slices_mut()[t][k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let scale = g[k].abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((g[k] - numeric).abs() / scale);
            checked += 1;
        }
        out.push(GradientCheck { tensor: t, layer: names[t].0, name: names[t].1, checked, max_rel_error: worst });
    }
    out
}
