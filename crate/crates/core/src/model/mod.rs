//! Hypergraph-convolution cascade classifier.
//!
//! `conv (→ ReLU) × L → linear → ReLU → dropout → linear → ReLU → dropout → linear`
//! producing two logits per node (index 1 = fake). Gradients are written out by hand
//! and accumulated in reverse through every layer, including the sparse convolution.

mod conv;
mod metrics;
mod optim;

pub use conv::{hyperconv_forward, HyperConvParams, Propagation};
pub use metrics::{classification_metrics, majority_baseline, ClassMetrics};
pub use optim::{Optimizer, OptimizerKind};

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::hypergraph::CascadeHypergraph;
use crate::seed;
use crate::{Error, Result};
use conv::add_row;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Output width of every convolution layer.
    pub hidden_dim: usize,
    /// Widths of the two hidden linear layers.
    pub mlp_dims: [usize; 2],
    pub num_conv_layers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            dropout: 0.5,
            learning_rate: 5e-4,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            hidden_dim: 64,
            mlp_dims: [32, 16],
            num_conv_layers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must be in [0, 1)"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.num_conv_layers == 0 {
            return Err(Error::invalid("at least one convolution layer is required"));
        }
        Ok(())
    }
}

/// Fully connected layer: `weight` is `in × out`, `bias` is `1 × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: DMatrix<f64>,
    pub bias: DMatrix<f64>,
}

/// The three linear layers after the convolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: [Linear; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub convs: Vec<HyperConvParams>,
    pub mlp: MlpParams,
}

fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut seed::Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound))
}

fn linear(fan_in: usize, fan_out: usize, rng: &mut seed::Rng) -> Linear {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Linear {
        weight: uniform(fan_in, fan_out, bound, rng),
        bias: uniform(1, fan_out, bound, rng),
    }
}

impl ModelParams {
    /// Glorot-uniform convolution weights with zero bias; linear layers uniform in
    /// `±1/sqrt(fan_in)`.
    pub fn init(input_dim: usize, cfg: &TrainConfig, rng: &mut seed::Rng) -> Self {
        let mut convs = Vec::with_capacity(cfg.num_conv_layers);
        let mut fan_in = input_dim;
        for _ in 0..cfg.num_conv_layers {
            let bound = (6.0 / (fan_in + cfg.hidden_dim) as f64).sqrt();
            convs.push(HyperConvParams {
                theta: uniform(fan_in, cfg.hidden_dim, bound, rng),
                bias: DMatrix::zeros(1, cfg.hidden_dim),
            });
            fan_in = cfg.hidden_dim;
        }
        let [h1, h2] = cfg.mlp_dims;
        let mlp = MlpParams {
            layers: [
                linear(cfg.hidden_dim, h1, rng),
                linear(h1, h2, rng),
                linear(h2, 2, rng),
            ],
        };
        ModelParams { convs, mlp }
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let z = |m: &DMatrix<f64>| DMatrix::zeros(m.nrows(), m.ncols());
        ModelParams {
            convs: self
                .convs
                .iter()
                .map(|c| HyperConvParams {
                    theta: z(&c.theta),
                    bias: z(&c.bias),
                })
                .collect(),
            mlp: MlpParams {
                layers: self.mlp.layers.clone().map(|l| Linear {
                    weight: z(&l.weight),
                    bias: z(&l.bias),
                }),
            },
        }
    }

    pub fn input_dim(&self) -> usize {
        self.convs[0].theta.nrows()
    }

    /// Tensors in a fixed order: conv Θ/b per layer, then linear W/b per layer.
    pub fn tensors(&self) -> Vec<&DMatrix<f64>> {
        let mut v = Vec::new();
        for c in &self.convs {
            v.push(&c.theta);
            v.push(&c.bias);
        }
        for l in &self.mlp.layers {
            v.push(&l.weight);
            v.push(&l.bias);
        }
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DMatrix<f64>> {
        let mut v = Vec::new();
        for c in &mut self.convs {
            v.push(&mut c.theta);
            v.push(&mut c.bias);
        }
        for l in &mut self.mlp.layers {
            v.push(&mut l.weight);
            v.push(&mut l.bias);
        }
        v
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut v = Vec::new();
        for i in 0..self.convs.len() {
            v.push(format!("conv{i}.theta"));
            v.push(format!("conv{i}.bias"));
        }
        for i in 0..3 {
            v.push(format!("linear{i}.weight"));
            v.push(format!("linear{i}.bias"));
        }
        v
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Inverted-dropout masks for the two dropout sites (entries 0 or `1/(1−p)`).
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub first: DMatrix<f64>,
    pub second: DMatrix<f64>,
}

pub fn dropout_mask(rows: usize, cols: usize, p: f64, rng: &mut seed::Rng) -> DMatrix<f64> {
    let keep = 1.0 / (1.0 - p);
    DMatrix::from_fn(rows, cols, |_, _| if rng.random::<f64>() < p { 0.0 } else { keep })
}

impl DropoutMasks {
    pub fn sample(nodes: usize, params: &ModelParams, p: f64, rng: &mut seed::Rng) -> Self {
        DropoutMasks {
            first: dropout_mask(nodes, params.mlp.layers[0].weight.ncols(), p, rng),
            second: dropout_mask(nodes, params.mlp.layers[1].weight.ncols(), p, rng),
        }
    }
}

/// Intermediate activations kept for the backward pass.
struct Trace {
    /// Input to each convolution.
    conv_in: Vec<DMatrix<f64>>,
    /// Pre-activation of each convolution.
    conv_pre: Vec<DMatrix<f64>>,
    /// Inputs to the three linear layers (after dropout where applicable).
    lin_in: [DMatrix<f64>; 3],
    /// Pre-activations of the first two linear layers.
    lin_pre: [DMatrix<f64>; 2],
    logits: DMatrix<f64>,
}

fn relu(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|x| x.max(0.0))
}

fn affine(x: &DMatrix<f64>, l: &Linear) -> DMatrix<f64> {
    let mut out = x * &l.weight;
    add_row(&mut out, &l.bias);
    out
}

fn run(x: &DMatrix<f64>, prop: &Propagation, params: &ModelParams, masks: Option<&DropoutMasks>) -> Result<Trace> {
    let mut conv_in = Vec::with_capacity(params.convs.len());
    let mut conv_pre = Vec::with_capacity(params.convs.len());
    let mut h = x.clone();
    for c in &params.convs {
        let z = hyperconv_forward(&h, prop, c)?;
        conv_in.push(h);
        h = relu(&z);
        conv_pre.push(z);
    }
    let [l0, l1, l2] = &params.mlp.layers;
    if h.ncols() != l0.weight.nrows() {
        return Err(Error::Shape("convolution output does not match the first linear layer".into()));
    }
    let u1 = affine(&h, l0);
    let mut a1 = relu(&u1);
    if let Some(m) = masks {
        a1.component_mul_assign(&m.first);
    }
    let u2 = affine(&a1, l1);
    let mut a2 = relu(&u2);
    if let Some(m) = masks {
        a2.component_mul_assign(&m.second);
    }
    let logits = affine(&a2, l2);
    Ok(Trace {
        conv_in,
        conv_pre,
        lin_in: [h, a1, a2],
        lin_pre: [u1, u2],
        logits,
    })
}

/// `N × 2` logits. Dropout is applied (masks drawn from `rng`) only when `train`.
pub fn forward(
    x: &DMatrix<f64>,
    prop: &Propagation,
    params: &ModelParams,
    dropout: f64,
    rng: &mut seed::Rng,
    train: bool,
) -> Result<DMatrix<f64>> {
    let masks = (train && dropout > 0.0).then(|| DropoutMasks::sample(x.nrows(), params, dropout, rng));
    forward_with_masks(x, prop, params, masks.as_ref())
}

/// Forward pass with explicit dropout masks (`None` = inference).
pub fn forward_with_masks(
    x: &DMatrix<f64>,
    prop: &Propagation,
    params: &ModelParams,
    masks: Option<&DropoutMasks>,
) -> Result<DMatrix<f64>> {
    run(x, prop, params, masks).map(|t| t.logits)
}

fn log_softmax_row(a: f64, b: f64) -> [f64; 2] {
    let m = a.max(b);
    let lse = m + ((a - m).exp() + (b - m).exp()).ln();
    [a - lse, b - lse]
}

/// Mean softmax cross-entropy over `train` nodes and the gradient of every tensor.
///
/// `classes[i]` is only read for `i` in `train`.
pub fn loss_and_grads(
    x: &DMatrix<f64>,
    prop: &Propagation,
    params: &ModelParams,
    classes: &[usize],
    train: &[usize],
    masks: Option<&DropoutMasks>,
) -> Result<(f64, ModelParams)> {
    if train.is_empty() {
        return Err(Error::invalid("training mask is empty"));
    }
    if let Some(&bad) = train.iter().find(|&&i| classes[i] > 1) {
        return Err(Error::invalid(format!("node {bad} has class {} (expected 0 or 1)", classes[bad])));
    }
    let t = run(x, prop, params, masks)?;
    let n = x.nrows();
    let scale = 1.0 / train.len() as f64;
    let mut loss = 0.0;
    let mut d_logits = DMatrix::zeros(n, 2);
    for &i in train {
        let lp = log_softmax_row(t.logits[(i, 0)], t.logits[(i, 1)]);
        let y = classes[i];
        loss -= lp[y] * scale;
        for c in 0..2 {
            let target = if c == y { 1.0 } else { 0.0 };
            d_logits[(i, c)] += (lp[c].exp() - target) * scale;
        }
    }

    let mut grads = params.zeros_like();
    let [l0, l1, l2] = &params.mlp.layers;
    let colsum = |m: &DMatrix<f64>| DMatrix::from_fn(1, m.ncols(), |_, j| m.column(j).sum());

    grads.mlp.layers[2].weight = t.lin_in[2].transpose() * &d_logits;
    grads.mlp.layers[2].bias = colsum(&d_logits);
    let mut d = &d_logits * l2.weight.transpose();
    if let Some(m) = masks {
        d.component_mul_assign(&m.second);
    }
    d.zip_apply(&t.lin_pre[1], |g, pre| {
        if pre <= 0.0 {
            *g = 0.0
        }
    });
    grads.mlp.layers[1].weight = t.lin_in[1].transpose() * &d;
    grads.mlp.layers[1].bias = colsum(&d);
    let mut d = &d * l1.weight.transpose();
    if let Some(m) = masks {
        d.component_mul_assign(&m.first);
    }
    d.zip_apply(&t.lin_pre[0], |g, pre| {
        if pre <= 0.0 {
            *g = 0.0
        }
    });
    grads.mlp.layers[0].weight = t.lin_in[0].transpose() * &d;
    grads.mlp.layers[0].bias = colsum(&d);
    let mut d = &d * l0.weight.transpose();

    for (l, c) in params.convs.iter().enumerate().rev() {
        d.zip_apply(&t.conv_pre[l], |g, pre| {
            if pre <= 0.0 {
                *g = 0.0
            }
        });
        grads.convs[l].bias = colsum(&d);
        // The propagation operator is symmetric, so it is its own adjoint.
        let d_xtheta = prop.apply(&d);
        grads.convs[l].theta = t.conv_in[l].transpose() * &d_xtheta;
        if l > 0 {
            d = &d_xtheta * c.theta.transpose();
        }
    }
    Ok((loss, grads))
}

/// Train/test node indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.test) {
            if i >= n {
                return Err(Error::invalid(format!("split index {i} out of range")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("node {i} appears twice in the split")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub params: ModelParams,
    /// Training loss before each optimizer step.
    pub loss_history: Vec<f64>,
    pub train_time_sec: f64,
}

/// Class index per node, `usize::MAX` for unknown labels.
pub fn node_classes(h: &CascadeHypergraph) -> Vec<usize> {
    h.labels().iter().map(|l| l.class().unwrap_or(usize::MAX)).collect()
}

/// Full-batch training for `cfg.epochs` steps.
pub fn train(h: &CascadeHypergraph, features: &DMatrix<f64>, split: &Split, cfg: &TrainConfig) -> Result<Trained> {
    let prop = Propagation::new(h);
    train_with(&prop, &node_classes(h), features, split, cfg)
}

pub fn train_with(
    prop: &Propagation,
    classes: &[usize],
    features: &DMatrix<f64>,
    split: &Split,
    cfg: &TrainConfig,
) -> Result<Trained> {
    cfg.validate()?;
    split.validate(features.nrows())?;
    if features.nrows() != prop.num_nodes() {
        return Err(Error::Shape("feature rows do not match hypergraph nodes".into()));
    }
    if let Some(&i) = split.train.iter().find(|&&i| classes[i] > 1) {
        return Err(Error::invalid(format!("training node {i} has no label")));
    }
    let mut seen = [false; 2];
    for &i in &split.train {
        seen[classes[i]] = true;
    }
    if !(seen[0] && seen[1]) {
        return Err(Error::invalid("training split must contain both classes"));
    }

    let mut rng = seed::rng(cfg.seed);
    let mut params = ModelParams::init(features.ncols(), cfg, &mut rng);
    let shapes: Vec<(usize, usize)> = params.tensors().iter().map(|t| t.shape()).collect();
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, &shapes);
    let mut history = Vec::with_capacity(cfg.epochs);

    let start = Instant::now();
    for _ in 0..cfg.epochs {
        let masks = (cfg.dropout > 0.0).then(|| DropoutMasks::sample(features.nrows(), &params, cfg.dropout, &mut rng));
        let (loss, grads) = loss_and_grads(features, prop, &params, classes, &split.train, masks.as_ref())?;
        history.push(loss);
        opt.step(&mut params.tensors_mut(), &grads.tensors());
    }
    let train_time_sec = start.elapsed().as_secs_f64();
    Ok(Trained {
        params,
        loss_history: history,
        train_time_sec,
    })
}

pub fn predict(logits: &DMatrix<f64>) -> Vec<usize> {
    logits
        .row_iter()
        .map(|r| usize::from(r[1] > r[0]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: ClassMetrics,
    pub inference_time_sec: f64,
}

/// Inference over all nodes, scored on `test`. The timed span covers the forward
/// pass and the metric computation.
pub fn evaluate(params: &ModelParams, prop: &Propagation, classes: &[usize], features: &DMatrix<f64>, test: &[usize]) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::invalid("test mask is empty"));
    }
    if let Some(&i) = test.iter().find(|&&i| classes[i] > 1) {
        return Err(Error::invalid(format!("test node {i} has no label")));
    }
    let start = Instant::now();
    let logits = forward_with_masks(features, prop, params, None)?;
    let pred = predict(&logits);
    let truth: Vec<usize> = test.iter().map(|&i| classes[i]).collect();
    let chosen: Vec<usize> = test.iter().map(|&i| pred[i]).collect();
    let metrics = classification_metrics(&truth, &chosen);
    Ok(Evaluation {
        metrics,
        inference_time_sec: start.elapsed().as_secs_f64(),
    })
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorDump {
    name: String,
    rows: usize,
    cols: usize,
    /// Row-major.
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    tensors: Vec<TensorDump>,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, config: &TrainConfig) -> Self {
        let tensors = params
            .tensor_names()
            .into_iter()
            .zip(params.tensors())
            .map(|(name, t)| TensorDump {
                name,
                rows: t.nrows(),
                cols: t.ncols(),
                data: t.transpose().iter().copied().collect(),
            })
            .collect();
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: config.clone(),
            tensors,
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!("unsupported checkpoint version {}", self.version)));
        }
        let first = self.tensors.first().ok_or_else(|| Error::invalid("empty checkpoint"))?;
        let mut rng = seed::rng(0);
        let mut params = ModelParams::init(first.rows, &self.config, &mut rng);
        let names = params.tensor_names();
        let slots = params.tensors_mut();
        if slots.len() != self.tensors.len() {
            return Err(Error::invalid("checkpoint tensor count does not match its config"));
        }
        for ((slot, dump), name) in slots.into_iter().zip(&self.tensors).zip(names) {
            if dump.name != name || slot.shape() != (dump.rows, dump.cols) || dump.data.len() != dump.rows * dump.cols {
                return Err(Error::invalid(format!("checkpoint tensor `{}` does not match `{name}`", dump.name)));
            }
            *slot = DMatrix::from_row_slice(dump.rows, dump.cols, &dump.data);
        }
        Ok(params)
    }
}
