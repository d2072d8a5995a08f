//! Fully connected regression network trained with mini-batch SGD.
//!
//! Batches are column matrices (`features × batch`). The loss is the mean
//! over samples of the squared Euclidean output error.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Linear => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Linear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `outputs × inputs`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

/// Per-dimension affine input normalization, `(x − mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Mean and population standard deviation of each dimension; constant
    /// dimensions get scale 1.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Input("cannot standardize an empty set".into()))?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            if r.len() != d {
                return Err(Error::shape(d, r.len()));
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 * m.abs().max(1e-300) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Standardized rows as columns of a matrix.
    pub fn apply(&self, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, rows.len());
        for (j, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::shape(d, r.len()));
            }
            for i in 0..d {
                m[(i, j)] = (r[i] - self.mean[i]) / self.scale[i];
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub input: Standardizer,
}

/// Parameter update rule. `Sgd` uses [`TrainHyper::momentum`]; `Adam`
/// uses β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    /// Multiplicative learning-rate decay applied after every epoch.
    #[serde(default = "default_decay")]
    pub lr_decay: f64,
    /// Rescales each batch gradient to at most this global L2 norm.
    #[serde(default = "default_clip")]
    pub clip_norm: Option<f64>,
    /// L2 penalty on weights (not biases), added to the gradient.
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default)]
    pub optimizer: Optimizer,
}

fn default_clip() -> Option<f64> {
    Some(1.0)
}

fn default_momentum() -> f64 {
    0.9
}

fn default_decay() -> f64 {
    0.97
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            learning_rate: 2e-3,
            epochs: 80,
            batch_size: 32,
            seed: 0,
            momentum: default_momentum(),
            lr_decay: default_decay(),
            clip_norm: default_clip(),
            weight_decay: 0.0,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config("lr_decay must lie in (0, 1]".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("weight_decay must be >= 0".into()));
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Config("clip_norm must be > 0".into()));
        }
        Ok(())
    }
}

pub struct TrainingRun {
    pub model: MlpModel,
    /// Full training-set loss after each epoch, m².
    pub losses: Vec<f64>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Gradient of the batch loss for each layer, `(weights, bias)`.
pub type Gradient = Vec<(DMatrix<f64>, DVector<f64>)>;

fn activate(z: &mut DMatrix<f64>, act: Activation) {
    if act == Activation::Relu {
        z.apply(|v| *v = v.max(0.0));
    }
}

impl MlpModel {
    /// He-initialized ReLU stack ending in a linear layer. Input
    /// normalization starts as the identity.
    pub fn init(input: usize, hidden: &[usize], output: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed, "mlp/init");
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(output);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let (gain, activation) = if l == last {
                    (1.0, Activation::Linear)
                } else {
                    (2.0, Activation::Relu)
                };
                let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("finite std");
                Layer {
                    weights: DMatrix::from_fn(fan_out, fan_in, |_, _| normal.sample(&mut rng)),
                    bias: DVector::zeros(fan_out),
                    activation,
                }
            })
            .collect();
        Self {
            layers,
            input: Standardizer::identity(input),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty network").weights.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Network output for already-normalized inputs (columns).
    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut a = x.clone();
        for layer in &self.layers {
            a = self.layer_out(layer, &a);
        }
        a
    }

    fn layer_out(&self, layer: &Layer, a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &layer.weights * a;
        for mut col in z.column_iter_mut() {
            col += &layer.bias;
        }
        activate(&mut z, layer.activation);
        z
    }

    /// Loss and its gradient on a batch of normalized inputs.
    pub fn loss_and_gradient(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> (f64, Gradient) {
        let mut acts = vec![x.clone()];
        for layer in &self.layers {
            let next = self.layer_out(layer, acts.last().expect("seeded"));
            acts.push(next);
        }
        let batch = x.ncols() as f64;
        let diff = acts.last().expect("seeded") - y;
        let loss = diff.norm_squared() / batch;
        let mut delta = diff * (2.0 / batch);
        let mut grads = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                delta.zip_apply(&acts[l + 1], |d, a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
            }
            let gw = &delta * acts[l].transpose();
            let gb = delta.column_sum();
            if l > 0 {
                delta = layer.weights.tr_mul(&delta);
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        (loss, grads)
    }

    /// Mean squared error over all samples, evaluated in chunks.
    pub fn loss(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        const CHUNK: usize = 512;
        let mut total = 0.0;
        let mut start = 0;
        while start < x.ncols() {
            let len = CHUNK.min(x.ncols() - start);
            let out = self.forward(&x.columns(start, len).into_owned());
            total += (out - y.columns(start, len)).norm_squared();
            start += len;
        }
        total / x.ncols().max(1) as f64
    }

    /// Predictions for raw (unnormalized) feature rows.
    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if rows.is_empty() {
            return Ok(vec![]);
        }
        let x = self.input.apply(rows)?;
        let out = self.forward(&x);
        Ok(out.column_iter().map(|c| c.iter().copied().collect()).collect())
    }

    pub fn predict(&self, row: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict_batch(&[row.to_vec()])?.remove(0))
    }
}

/// Trains a network on `features` (one row per sample) against `labels`.
/// Inputs are standardized with training statistics, which are stored in
/// the returned model; the output bias starts at the label mean.
pub fn train_fcnn(
    features: &[Vec<f64>],
    labels: &[Vec<f64>],
    hidden: &[usize],
    hyper: &TrainHyper,
) -> Result<TrainingRun> {
    hyper.validate()?;
    if features.len() != labels.len() {
        return Err(Error::shape(format!("{} labels", features.len()), labels.len()));
    }
    if features.is_empty() {
        return Err(Error::Input("no training samples".into()));
    }
    let input = Standardizer::fit(features)?;
    let x = input.apply(features)?;
    let out_dim = labels[0].len();
    let mut y = DMatrix::zeros(out_dim, labels.len());
    for (j, l) in labels.iter().enumerate() {
        if l.len() != out_dim {
            return Err(Error::shape(out_dim, l.len()));
        }
        y.column_mut(j).copy_from_slice(l);
    }
    let mut model = MlpModel::init(input.dim(), hidden, out_dim, hyper.seed);
    model.input = input;
    let last = model.layers.len() - 1;
    model.layers[last].bias = y.column_mean();

    let n = features.len();
    let zeros = || -> Gradient {
        model
            .layers
            .iter()
            .map(|l| (DMatrix::zeros(l.weights.nrows(), l.weights.ncols()), DVector::zeros(l.bias.len())))
            .collect()
    };
    // first and second moment buffers; the second is unused by SGD
    let mut first = zeros();
    let mut second = zeros();
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(hyper.seed, "mlp/shuffle");
    let mut lr = hyper.learning_rate;
    let mut losses = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hyper.batch_size) {
            let xb = x.select_columns(batch);
            let yb = y.select_columns(batch);
            let (_, mut grads) = model.loss_and_gradient(&xb, &yb);
            if let Some(limit) = hyper.clip_norm {
                let norm = grads
                    .iter()
                    .map(|(w, b)| w.norm_squared() + b.norm_squared())
                    .sum::<f64>()
                    .sqrt();
                if norm > limit {
                    for (w, b) in grads.iter_mut() {
                        *w *= limit / norm;
                        *b *= limit / norm;
                    }
                }
            }
            if hyper.weight_decay > 0.0 {
                for (layer, (gw, _)) in model.layers.iter().zip(grads.iter_mut()) {
                    *gw += &layer.weights * hyper.weight_decay;
                }
            }
            step += 1;
            for (l, (gw, gb)) in grads.into_iter().enumerate() {
                let layer = &mut model.layers[l];
                match hyper.optimizer {
                    Optimizer::Sgd => {
                        let (vw, vb) = &mut first[l];
                        *vw *= hyper.momentum;
                        *vw -= gw * lr;
                        *vb *= hyper.momentum;
                        *vb -= gb * lr;
                        layer.weights += &*vw;
                        layer.bias += &*vb;
                    }
                    Optimizer::Adam => {
                        let c1 = 1.0 - ADAM_BETA1.powi(step);
                        let c2 = 1.0 - ADAM_BETA2.powi(step);
                        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
                            for i in 0..p.len() {
                                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                            }
                        };
                        update(
                            layer.weights.as_mut_slice(),
                            gw.as_slice(),
                            first[l].0.as_mut_slice(),
                            second[l].0.as_mut_slice(),
                        );
                        update(
                            layer.bias.as_mut_slice(),
                            gb.as_slice(),
                            first[l].1.as_mut_slice(),
                            second[l].1.as_mut_slice(),
                        );
                    }
                }
            }
        }
        let loss = model.loss(&x, &y);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        losses.push(loss);
        lr *= hyper.lr_decay;
    }
    Ok(TrainingRun { model, losses })
}

/// Trailing moving average with the given window (shorter at the start).
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            values[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

/// True when the full-window moving average never increases.
pub fn smoothed_nonincreasing(values: &[f64], window: usize) -> bool {
    let w = window.max(1);
    if values.len() < w {
        return true;
    }
    let avg: Vec<f64> = values
        .windows(w)
        .map(|s| s.iter().sum::<f64>() / w as f64)
        .collect();
    avg.windows(2).all(|p| p[1] <= p[0])
}

/// Largest relative difference between the analytic gradient and central
/// finite differences over every parameter of `model` on one batch.
pub fn gradient_check(model: &MlpModel, x: &DMatrix<f64>, y: &DMatrix<f64>, h: f64) -> f64 {
    let (_, grads) = model.loss_and_gradient(x, y);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut compare = |analytic: f64, numeric: f64| {
        let denom = analytic.abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((analytic - numeric).abs() / denom);
    };
    for l in 0..model.layers.len() {
        for idx in 0..model.layers[l].weights.len() {
            let orig = model.layers[l].weights[idx];
            probe.layers[l].weights[idx] = orig + h;
            let up = probe.loss(x, y);
            probe.layers[l].weights[idx] = orig - h;
            let down = probe.loss(x, y);
            probe.layers[l].weights[idx] = orig;
            compare(grads[l].0[idx], (up - down) / (2.0 * h));
        }
        for idx in 0..model.layers[l].bias.len() {
            let orig = model.layers[l].bias[idx];
            probe.layers[l].bias[idx] = orig + h;
            let up = probe.loss(x, y);
            probe.layers[l].bias[idx] = orig - h;
            let down = probe.loss(x, y);
            probe.layers[l].bias[idx] = orig;
            compare(grads[l].1[idx], (up - down) / (2.0 * h));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_batch(d: usize, n: usize, out: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut rng = seed::rng(seed, "test/batch");
        let x = DMatrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0));
        let y = DMatrix::from_fn(out, n, |_, _| rng.random_range(-1.0..1.0));
        (x, y)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for trial in 0..10 {
            let model = MlpModel::init(5, &[7], 3, trial);
            let (x, y) = random_batch(5, 6, 3, trial);
            let err = gradient_check(&model, &x, &y, 1e-5);
            assert!(err < 1e-4, "trial {trial}: {err}");
        }
    }

    #[test]
    fn deep_gradient_matches_finite_differences() {
        let model = MlpModel::init(4, &[6, 6, 6, 6, 6, 6, 6, 6], 3, 9);
        let (x, y) = random_batch(4, 5, 3, 9);
        assert!(gradient_check(&model, &x, &y, 1e-5) < 1e-4);
    }

    #[test]
    fn single_sample_is_memorized() {
        let features = vec![vec![0.3, -1.2, 2.0, 0.7]];
        let labels = vec![vec![1.5, 0.8, 0.5]];
        let hyper = TrainHyper {
            learning_rate: 1e-2,
            epochs: 300,
            batch_size: 1,
            seed: 3,
            momentum: 0.9,
            lr_decay: 1.0,
            clip_norm: None,
            weight_decay: 0.0,
            optimizer: Optimizer::Sgd,
        };
        let run = train_fcnn(&features, &labels, &[16; 8], &hyper).unwrap();
        assert!(*run.losses.last().unwrap() < 1e-4, "{:?}", run.losses.last());
        let p = run.model.predict(&features[0]).unwrap();
        assert!((p[0] - 1.5).abs() < 1e-2);
    }

    #[test]
    fn training_is_bitwise_reproducible() {
        let (x, y) = random_batch(6, 40, 3, 1);
        let rows: Vec<Vec<f64>> = x.column_iter().map(|c| c.iter().copied().collect()).collect();
        let labels: Vec<Vec<f64>> = y.column_iter().map(|c| c.iter().copied().collect()).collect();
        let hyper = TrainHyper {
            epochs: 5,
            batch_size: 8,
            ..TrainHyper::default()
        };
        let a = train_fcnn(&rows, &labels, &[10; 3], &hyper).unwrap();
        let b = train_fcnn(&rows, &labels, &[10; 3], &hyper).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.losses, b.losses);
    }

    #[test]
    fn divergence_reports_the_epoch() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 0.0], vec![0.0, 1.0]];
        let labels = vec![vec![1e150], vec![-1e150], vec![1e150]];
        let hyper = TrainHyper {
            learning_rate: 0.5,
            epochs: 50,
            batch_size: 1,
            // clipping would keep these steps bounded
            clip_norm: None,
            ..TrainHyper::default()
        };
        match train_fcnn(&rows, &labels, &[4], &hyper) {
            Err(Error::Divergence { epoch, loss }) => {
                assert!(epoch < 50);
                assert!(!loss.is_finite());
            }
            other => panic!("expected divergence, got {:?}", other.map(|r| r.losses)),
        }
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let hyper = TrainHyper::default();
        assert!(matches!(
            train_fcnn(&[vec![1.0]], &[], &[4], &hyper),
            Err(Error::Shape { .. })
        ));
        assert!(train_fcnn(&[], &[], &[4], &hyper).is_err());
        let model = MlpModel::init(3, &[4], 3, 0);
        assert!(matches!(model.predict(&[1.0, 2.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn standardizer_uses_population_statistics() {
        let s = Standardizer::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.scale, vec![1.0, 1.0]);
        let m = s.apply(&[vec![3.0, 6.0]]).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn smoothing_helpers() {
        assert_eq!(moving_average(&[2.0, 4.0, 6.0], 2), vec![2.0, 3.0, 5.0]);
        assert!(smoothed_nonincreasing(&[5.0, 4.0, 4.5, 3.0, 2.9], 2));
        assert!(!smoothed_nonincreasing(&[5.0, 4.0, 6.0, 3.0], 2));
    }
}
