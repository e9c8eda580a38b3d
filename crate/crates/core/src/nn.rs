//! Dense feed-forward networks with backpropagation.
//!
//! Both the classifier (softmax output, cross-entropy loss) and the inverse
//! projection (sigmoid output, squared-error loss) are instances of [`Mlp`].

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// Output layer and its matched loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Output {
    /// Softmax with mean cross-entropy.
    Softmax,
    /// Logistic sigmoid with mean squared error over all components.
    Sigmoid,
}

impl Output {
    pub fn name(self) -> &'static str {
        match self {
            Output::Softmax => "softmax",
            Output::Sigmoid => "sigmoid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "softmax" => Some(Output::Softmax),
            "sigmoid" => Some(Output::Sigmoid),
            _ => None,
        }
    }
}

/// Row-wise softmax, shifted by the row maximum.
pub fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    hidden: Activation,
    output: Output,
    /// `weights[l]` is `widths[l] x widths[l + 1]`.
    pub(crate) weights: Vec<Array2<f64>>,
    pub(crate) biases: Vec<Array1<f64>>,
}

/// Parameter gradients, shaped like the network's parameters.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(widths: &[usize], hidden: Activation, output: Output, seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid layer widths {widths:?}")));
        }
        let mut rng = seed::rng(seed);
        let mut weights = Vec::with_capacity(widths.len() - 1);
        let mut biases = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit)));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            widths: widths.to_vec(),
            hidden,
            output,
            weights,
            biases,
        })
    }

    pub fn from_parameters(
        hidden: Activation,
        output: Output,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::InvalidArgument("weights and biases must pair up".into()));
        }
        let mut widths = vec![weights[0].nrows()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.nrows() != *widths.last().unwrap() || w.ncols() != b.len() {
                return Err(Error::InvalidArgument(format!("layer {l} shapes do not chain")));
            }
            widths.push(w.ncols());
        }
        if weights.iter().flatten().chain(biases.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(Self {
            widths,
            hidden,
            output,
            weights,
            biases,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn hidden(&self) -> Activation {
        self.hidden
    }

    pub fn output(&self) -> Output {
        self.output
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Output-layer pre-activations for a batch.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut acts = self.forward_trace(x);
        acts.pop().unwrap()
    }

    /// Network outputs for a batch (probabilities or sigmoid values).
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = self.logits(x);
        self.finish_output(&mut z);
        z
    }

    fn finish_output(&self, z: &mut Array2<f64>) {
        match self.output {
            Output::Softmax => softmax_rows(z),
            Output::Sigmoid => z.mapv_inplace(sigmoid),
        }
    }

    /// Activations of every layer: input, hidden outputs, final logits.
    fn forward_trace(&self, x: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let last = self.weights.len() - 1;
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(x.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].dot(w);
            z += b;
            if l < last {
                self.hidden.apply(&mut z);
            }
            acts.push(z);
        }
        acts
    }

    /// Mean loss over the batch and its parameter gradients.
    ///
    /// `targets` holds one-hot rows for softmax networks and target values
    /// for sigmoid networks.
    pub fn loss_and_gradients(&self, x: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> (f64, Gradients) {
        let batch = x.nrows() as f64;
        let mut acts = self.forward_trace(x);
        let mut out = acts.pop().unwrap();
        self.finish_output(&mut out);

        let (loss, mut delta) = match self.output {
            Output::Softmax => {
                let loss = -out
                    .iter()
                    .zip(targets.iter())
                    .filter(|(_, &t)| t > 0.0)
                    .map(|(&p, &t)| t * p.max(1e-300).ln())
                    .sum::<f64>()
                    / batch;
                let delta = (&out - &targets) / batch;
                (loss, delta)
            }
            Output::Sigmoid => {
                let count = out.len() as f64;
                let diff = &out - &targets;
                let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
                let delta = ndarray::Zip::from(&diff)
                    .and(&out)
                    .map_collect(|&d, &s| 2.0 * d * s * (1.0 - s) / count);
                (loss, delta)
            }
        };

        let layers = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); layers];
        let mut gb = vec![Array1::zeros(0); layers];
        for l in (0..layers).rev() {
            let input = &acts[l];
            gw[l] = input.t().dot(&delta);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l].t());
                let hidden = self.hidden;
                ndarray::Zip::from(&mut back)
                    .and(input)
                    .for_each(|g, &a| *g *= hidden.derivative_from_output(a));
                delta = back;
            }
        }
        (loss, Gradients { weights: gw, biases: gb })
    }

    /// Mean loss without gradients.
    pub fn loss(&self, x: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> f64 {
        let out = self.forward(x);
        match self.output {
            Output::Softmax => {
                -out.iter()
                    .zip(targets.iter())
                    .filter(|(_, &t)| t > 0.0)
                    .map(|(&p, &t)| t * p.max(1e-300).ln())
                    .sum::<f64>()
                    / x.nrows() as f64
            }
            Output::Sigmoid => {
                out.iter().zip(targets.iter()).map(|(o, t)| (o - t).powi(2)).sum::<f64>() / out.len() as f64
            }
        }
    }

    /// Flat mutable access to parameter `index` in layer order (weights
    /// row-major, then biases). Used by finite-difference checks.
    pub fn parameter_mut(&mut self, mut index: usize) -> &mut f64 {
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            if index < w.len() {
                return w.iter_mut().nth(index).unwrap();
            }
            index -= w.len();
            if index < b.len() {
                return &mut b[index];
            }
            index -= b.len();
        }
        panic!("parameter index out of range");
    }
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    SgdMomentum { momentum: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: Optimizer::adam(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

struct OptimizerState {
    first: Gradients,
    second: Gradients,
    step: i32,
}

impl OptimizerState {
    fn zeros_like(net: &Mlp) -> Self {
        let zeros = || Gradients {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        };
        Self {
            first: zeros(),
            second: zeros(),
            step: 0,
        }
    }

    fn apply(&mut self, net: &mut Mlp, grads: &Gradients, cfg: &TrainConfig) {
        self.step += 1;
        let lr = cfg.learning_rate;
        match cfg.optimizer {
            Optimizer::SgdMomentum { momentum } => {
                let update = |p: &mut f64, v: &mut f64, g: f64| {
                    *v = momentum * *v - lr * g;
                    *p += *v;
                };
                for l in 0..net.weights.len() {
                    ndarray::Zip::from(&mut net.weights[l])
                        .and(&mut self.first.weights[l])
                        .and(&grads.weights[l])
                        .for_each(|p, v, &g| update(p, v, g));
                    ndarray::Zip::from(&mut net.biases[l])
                        .and(&mut self.first.biases[l])
                        .and(&grads.biases[l])
                        .for_each(|p, v, &g| update(p, v, g));
                }
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
                };
                for l in 0..net.weights.len() {
                    ndarray::Zip::from(&mut net.weights[l])
                        .and(&mut self.first.weights[l])
                        .and(&mut self.second.weights[l])
                        .and(&grads.weights[l])
                        .for_each(|p, m, v, &g| update(p, m, v, g));
                    ndarray::Zip::from(&mut net.biases[l])
                        .and(&mut self.first.biases[l])
                        .and(&mut self.second.biases[l])
                        .and(&grads.biases[l])
                        .for_each(|p, m, v, &g| update(p, m, v, g));
                }
            }
        }
    }
}

/// Minibatch training. Returns the mean training loss of every epoch,
/// accumulated over the batches as they were visited.
pub fn train(net: &mut Mlp, x: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>, cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if x.nrows() != targets.nrows() || x.nrows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "{} inputs vs {} targets",
            x.nrows(),
            targets.nrows()
        )));
    }
    if x.ncols() != net.input_width() {
        return Err(Error::Shape {
            expected: net.input_width(),
            found: x.ncols(),
        });
    }
    if targets.ncols() != net.output_width() {
        return Err(Error::Shape {
            expected: net.output_width(),
            found: targets.ncols(),
        });
    }
    let mut rng = seed::rng(cfg.seed);
    let mut state = OptimizerState::zeros_like(net);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let bx = x.select(Axis(0), batch);
            let bt = targets.select(Axis(0), batch);
            let (loss, grads) = net.loss_and_gradients(bx.view(), bt.view());
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    learning_rate: cfg.learning_rate,
                });
            }
            total += loss * batch.len() as f64;
            state.apply(net, &grads, cfg);
        }
        if net.weights.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                learning_rate: cfg.learning_rate,
            });
        }
        history.push(total / x.nrows() as f64);
    }
    Ok(history)
}

/// Largest relative error between analytic gradients and central finite
/// differences over every parameter.
pub fn gradient_check(net: &Mlp, x: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>, step: f64) -> f64 {
    let (_, grads) = net.loss_and_gradients(x, targets);
    let analytic = grads.flat();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = *probe.parameter_mut(i);
        *probe.parameter_mut(i) = orig + step;
        let up = probe.loss(x, targets);
        *probe.parameter_mut(i) = orig - step;
        let down = probe.loss(x, targets);
        *probe.parameter_mut(i) = orig;
        let numeric = (up - down) / (2.0 * step);
        let scale = a.abs().max(numeric.abs());
        // Both near zero: absolute agreement is what matters.
        let err = if scale < 1e-7 { (a - numeric).abs() } else { (a - numeric).abs() / scale };
        worst = worst.max(err);
    }
    worst
}

/// One-hot encode class labels.
pub fn one_hot(labels: &[usize], classes: usize) -> Array2<f64> {
    let mut out = Array2::zeros((labels.len(), classes));
    for (i, &y) in labels.iter().enumerate() {
        out[[i, y]] = 1.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn fixture_inputs(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = seed::rng(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn softmax_gradients_match_finite_differences() {
        let net = Mlp::new(&[3, 5, 4, 3], Activation::Tanh, Output::Softmax, 1).unwrap();
        let x = fixture_inputs(6, 3, 2);
        let t = one_hot(&[0, 1, 2, 2, 1, 0], 3);
        assert!(gradient_check(&net, x.view(), t.view(), 1e-5) < 1e-4);
    }

    #[test]
    fn sigmoid_gradients_match_finite_differences() {
        let net = Mlp::new(&[2, 6, 4], Activation::Tanh, Output::Sigmoid, 3).unwrap();
        let x = fixture_inputs(5, 2, 4);
        let t = fixture_inputs(5, 4, 5).mapv(|v| (v + 1.0) / 2.0);
        assert!(gradient_check(&net, x.view(), t.view(), 1e-5) < 1e-4);
    }

    #[test]
    fn softmax_is_overflow_safe() {
        let mut z = array![[1000.0, 0.0, 0.0]];
        softmax_rows(&mut z);
        assert!(z[[0, 0]] >= 1.0 - 1e-9);
        assert!(z.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sgd_momentum_and_adam_reduce_loss() {
        let x = fixture_inputs(64, 2, 9);
        let labels: Vec<usize> = x.rows().into_iter().map(|r| usize::from(r[0] + r[1] > 0.0)).collect();
        let t = one_hot(&labels, 2);
        for optimizer in [Optimizer::SgdMomentum { momentum: 0.9 }, Optimizer::adam()] {
            let mut net = Mlp::new(&[2, 8, 2], Activation::Relu, Output::Softmax, 0).unwrap();
            let cfg = TrainConfig {
                epochs: 30,
                batch_size: 16,
                learning_rate: 0.01,
                optimizer,
                seed: 1,
            };
            let hist = train(&mut net, x.view(), t.view(), &cfg).unwrap();
            assert!(hist.last().unwrap() < &hist[0], "{optimizer:?}: {hist:?}");
        }
    }

    #[test]
    fn divergence_is_reported() {
        let x = fixture_inputs(16, 2, 9) * 1e200;
        let labels: Vec<usize> = (0..16).map(|i| i % 2).collect();
        let t = one_hot(&labels, 2);
        let mut net = Mlp::new(&[2, 4, 2], Activation::Relu, Output::Softmax, 0).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            learning_rate: 1e10,
            optimizer: Optimizer::SgdMomentum { momentum: 0.0 },
            ..Default::default()
        };
        let r = train(&mut net, x.view(), t.view(), &cfg);
        assert!(matches!(r, Err(Error::Divergence { epoch: 1, .. })), "{r:?}");
    }
}
