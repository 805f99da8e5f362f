//! Patch-based network of stacked locally-connected layers with shared
//! weights, SoftSign activations and a linear classification head.
//!
//! Every layer slides one weight matrix over a grid of input windows. Layer 1
//! reads the raw `rf × rf × channels` patch, each further layer reads the
//! activation grid of the previous one, and the head sees the flattened
//! output of the last hidden layer.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::InitMethod;
use crate::linalg::{axpy, dot, Matrix};
use crate::rng::derive_seed;

/// Divisor mapping 8-bit pixel values onto [-1, 1].
pub const PIXEL_SCALE: f64 = 127.5;

/// `v / 127.5 − 1`, shared by LDA fitting, training and evaluation.
#[inline]
pub fn scale_pixel(v: u8) -> f64 {
    f64::from(v) / PIXEL_SCALE - 1.0
}

#[inline]
pub fn softsign(x: f64) -> f64 {
    x / (1.0 + x.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Softsign,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Softsign => softsign(x),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Softsign => {
                let t = 1.0 - y.abs();
                t * t
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Window size, stride and width of one locally-connected layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub patch_h: usize,
    pub patch_w: usize,
    pub offset_h: usize,
    pub offset_w: usize,
    pub neurons: usize,
}

impl LayerSpec {
    pub fn square(patch: usize, offset: usize, neurons: usize) -> Self {
        Self {
            patch_h: patch,
            patch_w: patch,
            offset_h: offset,
            offset_w: offset,
            neurons,
        }
    }
}

/// The three-layer document architecture: 5×5/3 → 3×3/2 → 3×3, with 24, 48
/// and 72 neurons. The last offset is irrelevant because that layer sees a
/// single window; it is stored as 1.
pub fn document_architecture() -> Vec<LayerSpec> {
    vec![
        LayerSpec::square(5, 3, 24),
        LayerSpec::square(3, 2, 48),
        LayerSpec::square(3, 1, 72),
    ]
}

/// Receptive field `(h, w)` of a stack of layers:
/// `rf₁ = p₁`, `rf_k = rf_{k−1} + (p_k − 1)·Π_{j<k} offset_j`.
pub fn receptive_field(specs: &[LayerSpec]) -> (usize, usize) {
    let (mut rf_h, mut rf_w) = (0usize, 0usize);
    let (mut jump_h, mut jump_w) = (1usize, 1usize);
    for (i, s) in specs.iter().enumerate() {
        if i == 0 {
            rf_h = s.patch_h;
            rf_w = s.patch_w;
        } else {
            rf_h += (s.patch_h - 1) * jump_h;
            rf_w += (s.patch_w - 1) * jump_w;
        }
        jump_h *= s.offset_h;
        jump_w *= s.offset_w;
    }
    (rf_h, rf_w)
}

/// Input and output grid dimensions of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub in_h: usize,
    pub in_w: usize,
    pub in_ch: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub out_ch: usize,
}

impl Grid {
    pub fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    pub fn out_len(&self) -> usize {
        self.out_h * self.out_w * self.out_ch
    }

    pub fn in_len(&self) -> usize {
        self.in_h * self.in_w * self.in_ch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub input_channels: usize,
    /// `neurons × fan_in`; column order is (row, column, channel) of the window.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn zeroed(spec: LayerSpec, input_channels: usize, activation: Activation) -> Self {
        let fan_in = spec.patch_h * spec.patch_w * input_channels;
        Self {
            spec,
            input_channels,
            weights: Matrix::zeros(spec.neurons, fan_in),
            bias: vec![0.0; spec.neurons],
            activation,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.spec.patch_h * self.spec.patch_w * self.input_channels
    }

    pub fn neurons(&self) -> usize {
        self.spec.neurons
    }

    /// Writes `f(W·window + b)` into `out`.
    #[inline]
    pub fn apply_window(&self, window: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self
                .activation
                .apply(dot(self.weights.row(j), window) + self.bias[j]);
        }
    }
}

/// Copies the window whose top-left cell is `(y0, x0)` from a
/// `? × width × channels` map into `out`.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn gather_window(
    input: &[f64],
    width: usize,
    channels: usize,
    patch_h: usize,
    patch_w: usize,
    y0: usize,
    x0: usize,
    out: &mut [f64],
) {
    let run = patch_w * channels;
    for dy in 0..patch_h {
        let start = ((y0 + dy) * width + x0) * channels;
        out[dy * run..(dy + 1) * run].copy_from_slice(&input[start..start + run]);
    }
}

/// One labelled input patch, pixel values already scaled to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub patch: Vec<f64>,
    pub label: usize,
}

/// Per-layer outputs of a forward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    /// Output grid of each hidden layer, `out_h × out_w × neurons`.
    pub hidden: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_channels: usize,
    class_count: usize,
    /// Hidden layers followed by the head.
    layers: Vec<Layer>,
    grids: Vec<Grid>,
}

impl Network {
    /// Builds a zero-initialized network; the input patch size is the
    /// receptive field of `specs`.
    pub fn new(input_channels: usize, class_count: usize, specs: &[LayerSpec]) -> Result<Self> {
        if input_channels == 0 || class_count == 0 {
            return Err(Error::InvalidInput(
                "input channels and class count must be positive".into(),
            ));
        }
        if specs.is_empty() {
            return Err(Error::InvalidInput("at least one hidden layer is required".into()));
        }
        let mut channels = input_channels;
        let mut layers = Vec::with_capacity(specs.len() + 1);
        for (i, s) in specs.iter().enumerate() {
            if s.patch_h == 0 || s.patch_w == 0 || s.offset_h == 0 || s.offset_w == 0 || s.neurons == 0 {
                return Err(Error::InvalidInput(format!(
                    "layer {}: patch, offset and neurons must be at least 1",
                    i + 1
                )));
            }
            let fan_in = s.patch_h * s.patch_w * channels;
            if s.neurons > fan_in {
                return Err(Error::InvalidInput(format!(
                    "layer {}: {} neurons exceed the {fan_in} input dimensions",
                    i + 1,
                    s.neurons
                )));
            }
            layers.push(Layer::zeroed(*s, channels, Activation::Softsign));
            channels = s.neurons;
        }
        let grids = compute_grids(input_channels, &layers)?;
        let last = grids.last().expect("non-empty");
        let head_spec = LayerSpec {
            patch_h: last.out_h,
            patch_w: last.out_w,
            offset_h: 1,
            offset_w: 1,
            neurons: class_count,
        };
        layers.push(Layer::zeroed(head_spec, channels, Activation::Linear));
        let grids = compute_grids(input_channels, &layers)?;
        Ok(Self {
            input_channels,
            class_count,
            layers,
            grids,
        })
    }

    /// Reassembles a network from explicit layers (hidden layers, then head).
    pub fn from_layers(input_channels: usize, class_count: usize, layers: Vec<Layer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::Shape("need at least one hidden layer and a head".into()));
        }
        let specs: Vec<LayerSpec> = layers[..layers.len() - 1].iter().map(|l| l.spec).collect();
        let skeleton = Self::new(input_channels, class_count, &specs)?;
        for (i, (have, want)) in layers.iter().zip(&skeleton.layers).enumerate() {
            if have.spec != want.spec && i + 1 < layers.len() {
                return Err(Error::Shape(format!("layer {} spec mismatch", i + 1)));
            }
            if (have.spec.patch_h, have.spec.patch_w, have.spec.neurons)
                != (want.spec.patch_h, want.spec.patch_w, want.spec.neurons)
            {
                return Err(Error::Shape(format!("layer {} shape mismatch", i + 1)));
            }
            if have.input_channels != want.input_channels
                || have.weights.rows() != want.weights.rows()
                || have.weights.cols() != want.weights.cols()
                || have.bias.len() != want.bias.len()
            {
                return Err(Error::Shape(format!(
                    "layer {}: expected {}x{} weights and {} biases",
                    i + 1,
                    want.weights.rows(),
                    want.weights.cols(),
                    want.bias.len()
                )));
            }
            if have.activation != want.activation {
                return Err(Error::Shape(format!("layer {}: unexpected activation", i + 1)));
            }
            if !have.weights.is_finite() || have.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::InvalidInput(format!("layer {}: non-finite parameters", i + 1)));
            }
        }
        Ok(Self {
            layers,
            ..skeleton
        })
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// `(height, width)` of the input patch.
    pub fn receptive_field(&self) -> (usize, usize) {
        (self.grids[0].in_h, self.grids[0].in_w)
    }

    pub fn patch_len(&self) -> usize {
        self.grids[0].in_len()
    }

    pub fn hidden(&self) -> &[Layer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn hidden_mut(&mut self) -> &mut [Layer] {
        let n = self.layers.len() - 1;
        &mut self.layers[..n]
    }

    pub fn head(&self) -> &Layer {
        self.layers.last().expect("network has a head")
    }

    pub fn head_mut(&mut self) -> &mut Layer {
        self.layers.last_mut().expect("network has a head")
    }

    /// Hidden layers followed by the head.
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Grid geometry of each layer, head last.
    pub fn grids(&self) -> &[Grid] {
        &self.grids
    }

    /// `(out_h, out_w, neurons)` of each hidden layer.
    pub fn hidden_shapes(&self) -> Vec<(usize, usize, usize)> {
        self.grids[..self.grids.len() - 1]
            .iter()
            .map(|g| (g.out_h, g.out_w, g.out_ch))
            .collect()
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.hidden().iter().map(|l| l.spec).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols() + l.bias.len())
            .sum()
    }

    /// Runs layer `index` over its whole input grid.
    pub(crate) fn apply_layer(&self, index: usize, input: &[f64], out: &mut [f64], window: &mut [f64]) {
        let layer = &self.layers[index];
        let g = &self.grids[index];
        let n = g.out_ch;
        let s = layer.spec;
        for gy in 0..g.out_h {
            for gx in 0..g.out_w {
                gather_window(
                    input,
                    g.in_w,
                    g.in_ch,
                    s.patch_h,
                    s.patch_w,
                    gy * s.offset_h,
                    gx * s.offset_w,
                    window,
                );
                let pos = gy * g.out_w + gx;
                layer.apply_window(window, &mut out[pos * n..(pos + 1) * n]);
            }
        }
    }

    fn check_patch(&self, patch: &[f64]) -> Result<()> {
        if patch.len() != self.patch_len() {
            let (h, w) = self.receptive_field();
            return Err(Error::Shape(format!(
                "patch has {} values, expected {h}x{w}x{}",
                patch.len(),
                self.input_channels
            )));
        }
        Ok(())
    }

    pub fn forward(&self, patch: &[f64]) -> Result<Activations> {
        self.check_patch(patch)?;
        let max_fan_in = self.layers.iter().map(Layer::fan_in).max().unwrap_or(0);
        let mut window = vec![0.0; max_fan_in];
        let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() - 1);
        let mut scores = vec![0.0; self.class_count];
        for i in 0..self.layers.len() {
            let fan_in = self.layers[i].fan_in();
            let input: &[f64] = if i == 0 { patch } else { &hidden[i - 1] };
            if i + 1 == self.layers.len() {
                self.apply_layer(i, input, &mut scores, &mut window[..fan_in]);
            } else {
                let mut out = vec![0.0; self.grids[i].out_len()];
                self.apply_layer(i, input, &mut out, &mut window[..fan_in]);
                hidden.push(out);
            }
        }
        Ok(Activations { hidden, scores })
    }

    pub fn predict(&self, patch: &[f64]) -> Result<usize> {
        Ok(crate::lda::argmax(&self.forward(patch)?.scores))
    }

    /// Mean softmax cross-entropy over `batch` and its gradient with respect
    /// to every weight and bias.
    pub fn loss_and_gradients(&self, batch: &[Sample]) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        for s in batch {
            self.check_patch(&s.patch)?;
            if s.label >= self.class_count {
                return Err(Error::LabelRange {
                    label: s.label,
                    class_count: self.class_count,
                });
            }
        }
        // Fixed chunking and an in-order reduction keep the result independent
        // of the thread count.
        let partials: Vec<(f64, Gradients)> = batch
            .par_chunks(GRADIENT_CHUNK)
            .map(|chunk| {
                let mut grads = Gradients::zeros_like(self);
                let mut scratch = Scratch::new(self);
                let loss: f64 = chunk
                    .iter()
                    .map(|s| self.backprop_sample(s, &mut grads, &mut scratch))
                    .sum();
                (loss, grads)
            })
            .collect();
        let mut iter = partials.into_iter();
        let (mut loss, mut grads) = iter.next().expect("non-empty batch");
        for (l, g) in iter {
            loss += l;
            grads.add_assign(&g);
        }
        let scale = 1.0 / batch.len() as f64;
        grads.scale(scale);
        Ok((loss * scale, grads))
    }

    /// Accumulates one sample's (unscaled) gradient and returns its loss.
    fn backprop_sample(&self, sample: &Sample, grads: &mut Gradients, scratch: &mut Scratch) -> f64 {
        let acts = self
            .forward(&sample.patch)
            .expect("patch size validated by caller");
        let scores = &acts.scores;
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = scores.iter().map(|s| (s - max).exp()).sum();
        let log_norm = max + sum_exp.ln();
        let loss = log_norm - scores[sample.label];

        // dL/dscores = softmax − one-hot
        let mut upstream: Vec<f64> = scores.iter().map(|s| (s - log_norm).exp()).collect();
        upstream[sample.label] -= 1.0;

        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let g = &self.grids[i];
            let s = layer.spec;
            let n = g.out_ch;
            let output: &[f64] = if i + 1 == self.layers.len() {
                scores
            } else {
                &acts.hidden[i]
            };
            let input: &[f64] = if i == 0 { &sample.patch } else { &acts.hidden[i - 1] };

            // Gradient with respect to pre-activations.
            for (u, &y) in upstream.iter_mut().zip(output) {
                *u *= layer.activation.derivative_from_output(y);
            }

            let need_input_grad = i > 0;
            let mut downstream = if need_input_grad {
                vec![0.0; g.in_len()]
            } else {
                Vec::new()
            };
            let fan_in = layer.fan_in();
            let window = &mut scratch.window[..fan_in];
            let d_window = &mut scratch.d_window[..fan_in];
            let lg = &mut grads.layers[i];
            for gy in 0..g.out_h {
                for gx in 0..g.out_w {
                    let (y0, x0) = (gy * s.offset_h, gx * s.offset_w);
                    gather_window(input, g.in_w, g.in_ch, s.patch_h, s.patch_w, y0, x0, window);
                    let pos = gy * g.out_w + gx;
                    let dz = &upstream[pos * n..(pos + 1) * n];
                    if need_input_grad {
                        d_window.iter_mut().for_each(|v| *v = 0.0);
                    }
                    for (j, &dzj) in dz.iter().enumerate() {
                        if dzj == 0.0 {
                            continue;
                        }
                        axpy(dzj, window, lg.weights.row_mut(j));
                        lg.bias[j] += dzj;
                        if need_input_grad {
                            axpy(dzj, layer.weights.row(j), d_window);
                        }
                    }
                    if need_input_grad {
                        scatter_window(&mut downstream, g.in_w, g.in_ch, s.patch_h, s.patch_w, y0, x0, d_window);
                    }
                }
            }
            upstream = downstream;
        }
        loss
    }

    /// Returns a copy updated by `w ← w − lr·g`.
    pub fn sgd_step(&self, grads: &Gradients, learning_rate: f64) -> Result<Network> {
        let mut next = self.clone();
        next.apply_sgd(grads, learning_rate)?;
        Ok(next)
    }

    pub fn apply_sgd(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        grads.check_shape(self)?;
        if learning_rate == 0.0 {
            return Ok(());
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            axpy(-learning_rate, g.weights.as_slice(), layer.weights.as_mut_slice());
            axpy(-learning_rate, &g.bias, &mut layer.bias);
        }
        Ok(())
    }
}

const GRADIENT_CHUNK: usize = 16;

fn compute_grids(input_channels: usize, layers: &[Layer]) -> Result<Vec<Grid>> {
    let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
    let (mut h, mut w) = receptive_field(&specs);
    let mut ch = input_channels;
    let mut grids = Vec::with_capacity(layers.len());
    for (i, s) in specs.iter().enumerate() {
        if h < s.patch_h || w < s.patch_w {
            return Err(Error::Shape(format!("layer {} window exceeds its input grid", i + 1)));
        }
        let out_h = (h - s.patch_h) / s.offset_h + 1;
        let out_w = (w - s.patch_w) / s.offset_w + 1;
        grids.push(Grid {
            in_h: h,
            in_w: w,
            in_ch: ch,
            out_h,
            out_w,
            out_ch: s.neurons,
        });
        h = out_h;
        w = out_w;
        ch = s.neurons;
    }
    Ok(grids)
}

#[allow(clippy::too_many_arguments)]
fn scatter_window(
    target: &mut [f64],
    width: usize,
    channels: usize,
    patch_h: usize,
    patch_w: usize,
    y0: usize,
    x0: usize,
    values: &[f64],
) {
    let run = patch_w * channels;
    for dy in 0..patch_h {
        let start = ((y0 + dy) * width + x0) * channels;
        for (t, v) in target[start..start + run]
            .iter_mut()
            .zip(&values[dy * run..(dy + 1) * run])
        {
            *t += v;
        }
    }
}

struct Scratch {
    window: Vec<f64>,
    d_window: Vec<f64>,
}

impl Scratch {
    fn new(net: &Network) -> Self {
        let max = net.layers.iter().map(Layer::fan_in).max().unwrap_or(0);
        Self {
            window: vec![0.0; max],
            d_window: vec![0.0; max],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Gradients for every layer, head last; shapes mirror the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    fn check_shape(&self, net: &Network) -> Result<()> {
        let ok = self.layers.len() == net.layers.len()
            && self.layers.iter().zip(&net.layers).all(|(g, l)| {
                g.weights.rows() == l.weights.rows()
                    && g.weights.cols() == l.weights.cols()
                    && g.bias.len() == l.bias.len()
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("gradient shapes do not match the network".into()))
        }
    }

    fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            axpy(1.0, b.weights.as_slice(), a.weights.as_mut_slice());
            axpy(1.0, &b.bias, &mut a.bias);
        }
    }

    fn scale(&mut self, s: f64) {
        for g in self.layers.iter_mut() {
            g.weights.as_mut_slice().iter_mut().for_each(|v| *v *= s);
            g.bias.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Frobenius norm over weights and biases of each layer.
    pub fn norms(&self) -> Vec<f64> {
        self.layers
            .iter()
            .map(|g| {
                (g.weights.as_slice().iter().map(|v| v * v).sum::<f64>()
                    + g.bias.iter().map(|v| v * v).sum::<f64>())
                .sqrt()
            })
            .collect()
    }
}

/// Plain SGD hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// 100 epochs of 100k samples, mini-batches of 4096, learning rate 0.01.
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 4096,
            epochs: 100,
            samples_per_epoch: 100_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput("learning rate must be positive".into()));
        }
        if self.batch_size == 0 || self.samples_per_epoch == 0 {
            return Err(Error::InvalidInput(
                "batch size and samples per epoch must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Seed of the patch stream for `epoch` (1-based).
    pub fn epoch_seed(&self, epoch: usize) -> u64 {
        derive_seed(self.seed, epoch as u64)
    }
}

/// Anything that can produce a deterministic stream of labelled patches.
pub trait SampleSource {
    fn class_count(&self) -> usize;

    /// Draws `count` samples; equal seeds give equal sequences.
    fn draw(&self, seed: u64, count: usize) -> Result<Vec<Sample>>;
}

/// State handed to the training callback.
pub struct EpochReport<'a> {
    /// 0 before any update, then the number of completed epochs.
    pub epoch: usize,
    pub network: &'a Network,
    /// Mean training loss over the epoch just completed.
    pub mean_loss: Option<f64>,
}

/// Trains for `config.epochs` epochs, invoking `hook` before the first update
/// and after every epoch.
pub fn train<F>(net: Network, source: &dyn SampleSource, config: &TrainConfig, hook: F) -> Result<Network>
where
    F: FnMut(&EpochReport<'_>) -> Result<()>,
{
    train_from(net, source, config, 0, hook)
}

/// Continues training a network that already completed `start_epoch` epochs
/// of the same schedule. Each epoch draws its patches from a seed derived
/// from `config.seed` and the epoch number, so a resumed run replays the
/// uninterrupted trajectory.
pub fn train_from<F>(
    mut net: Network,
    source: &dyn SampleSource,
    config: &TrainConfig,
    start_epoch: usize,
    mut hook: F,
) -> Result<Network>
where
    F: FnMut(&EpochReport<'_>) -> Result<()>,
{
    config.validate()?;
    if source.class_count() != net.class_count() {
        return Err(Error::InvalidInput(format!(
            "sampler has {} classes, network has {}",
            source.class_count(),
            net.class_count()
        )));
    }
    hook(&EpochReport {
        epoch: start_epoch,
        network: &net,
        mean_loss: None,
    })?;
    for epoch in start_epoch + 1..=config.epochs {
        let samples = source.draw(config.epoch_seed(epoch), config.samples_per_epoch)?;
        let mut loss_sum = 0.0;
        for batch in samples.chunks(config.batch_size) {
            let (loss, grads) = net.loss_and_gradients(batch)?;
            loss_sum += loss * batch.len() as f64;
            net.apply_sgd(&grads, config.learning_rate)?;
        }
        if net.layers.iter().any(|l| !l.weights.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        hook(&EpochReport {
            epoch,
            network: &net,
            mean_loss: Some(loss_sum / samples.len() as f64),
        })?;
    }
    Ok(net)
}

/// Where the weights of a model came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub init_method: InitMethod,
    pub seed: u64,
    #[serde(default)]
    pub lda_sample_count: Option<usize>,
}

/// Training progress recorded in a model file so that runs can be resumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingState {
    pub seed: u64,
    pub epochs_completed: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub samples_per_epoch: usize,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerRecord {
    patch: [usize; 2],
    offset: [usize; 2],
    neurons: usize,
    activation: Activation,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelRecord {
    format_version: u32,
    input_channels: usize,
    class_count: usize,
    layers: Vec<LayerRecord>,
    provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    training: Option<TrainingState>,
}

/// A network together with its provenance, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub network: Network,
    pub provenance: Provenance,
    pub training: Option<TrainingState>,
}

impl Model {
    pub fn new(network: Network, provenance: Provenance) -> Self {
        Self {
            network,
            provenance,
            training: None,
        }
    }

    /// Serializes to the versioned JSON model format. Floats are written in
    /// shortest round-trip form, so reloading restores every bit.
    pub fn to_json(&self) -> Result<String> {
        let net = &self.network;
        let layers = net
            .layers
            .iter()
            .map(|l| LayerRecord {
                patch: [l.spec.patch_h, l.spec.patch_w],
                offset: [l.spec.offset_h, l.spec.offset_w],
                neurons: l.spec.neurons,
                activation: l.activation,
                weights: l.weights.to_rows(),
                bias: l.bias.clone(),
            })
            .collect();
        let record = ModelRecord {
            format_version: MODEL_FORMAT_VERSION,
            input_channels: net.input_channels,
            class_count: net.class_count,
            layers,
            provenance: self.provenance.clone(),
            training: self.training.clone(),
        };
        Ok(serde_json::to_string_pretty(&record)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: ModelRecord = serde_json::from_str(text)?;
        if record.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Data(format!(
                "unsupported model format version {}",
                record.format_version
            )));
        }
        let mut channels = record.input_channels;
        let mut layers = Vec::with_capacity(record.layers.len());
        for r in record.layers {
            let spec = LayerSpec {
                patch_h: r.patch[0],
                patch_w: r.patch[1],
                offset_h: r.offset[0],
                offset_w: r.offset[1],
                neurons: r.neurons,
            };
            let weights = Matrix::from_rows(&r.weights)?;
            layers.push(Layer {
                spec,
                input_channels: channels,
                weights,
                bias: r.bias,
                activation: r.activation,
            });
            channels = spec.neurons;
        }
        let network = Network::from_layers(record.input_channels, record.class_count, layers)?;
        Ok(Self {
            network,
            provenance: record.provenance,
            training: record.training,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
