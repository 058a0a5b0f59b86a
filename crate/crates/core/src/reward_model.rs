//! Replay buffer of ground-truth samples and the MLP reward model trained on it.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{math, seed, Error, Result};
use rand::Rng;

pub const DEFAULT_CAPACITY: usize = 100_000;

/// FIFO store of `(normalized action, ground-truth reward)` pairs.
///
/// The only way in is [`ReplayBuffer::push`], which the campaign calls with
/// evaluator results only; `inserted` counts every push ever made so the
/// caller can audit it against the ground-truth budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<(Vec<f64>, f64)>,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer { capacity: capacity.max(1), entries: VecDeque::new(), inserted: 0 }
    }

    pub fn push(&mut self, action: Vec<f64>, reward: f64) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((action, reward));
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn get(&self, i: usize) -> (&[f64], f64) {
        let (a, r) = &self.entries[i];
        (a, *r)
    }

    /// Training is allowed only once the buffer holds strictly more than
    /// `batch_size` entries.
    pub fn is_ready(&self, batch_size: usize) -> bool {
        self.entries.len() > batch_size
    }
}

/// Uniform batch of distinct buffer indices, or `None` while the buffer is
/// not ready.
pub fn sample_batch(buffer: &ReplayBuffer, batch_size: usize, rng_seed: u64) -> Option<Vec<usize>> {
    if !buffer.is_ready(batch_size) {
        return None;
    }
    let mut rng = seed::rng(rng_seed);
    Some(rand::seq::index::sample(&mut rng, buffer.len(), batch_size).into_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Silu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => math::tanh(z),
            Activation::Silu => z * math::sigmoid(z),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = math::tanh(z);
                1.0 - t * t
            }
            Activation::Silu => {
                let s = math::sigmoid(z);
                s * (1.0 + z * (1.0 - s))
            }
        }
    }
}

/// Dense layer with a row-major `outputs x inputs` weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub shape: [usize; 2],
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Layer { shape: [outputs, inputs], weights: alloc::vec![0.0; outputs * inputs], bias: alloc::vec![0.0; outputs] }
    }

    fn outputs(&self) -> usize {
        self.shape[0]
    }

    fn inputs(&self) -> usize {
        self.shape[1]
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let n = self.inputs();
        for (row, b) in self.weights.chunks_exact(n).zip(&self.bias) {
            out.push(b + math::dot(row, x));
        }
    }

    fn check(&self) -> Result<()> {
        let [o, i] = self.shape;
        if o == 0 || i == 0 || self.weights.len() != o * i || self.bias.len() != o {
            return Err(Error::invalid("layer shape does not match its data"));
        }
        Ok(())
    }
}

/// Feed-forward network: activation after every layer except the last,
/// which is a single linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mlp {
    pub activation: Activation,
    pub layers: Vec<Layer>,
}

/// Scratch space reused across forward/backward passes.
#[derive(Default)]
struct Workspace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next: Vec<f64>,
}

impl Mlp {
    /// Network `input -> hidden... -> 1`, weights and biases drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(input: usize, hidden: &[usize], activation: Activation, rng_seed: u64) -> Result<Self> {
        if input == 0 || hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        let mut rng = seed::rng(rng_seed);
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(1);
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / math::sqrt(w[0] as f64);
                let mut layer = Layer::zeros(w[1], w[0]);
                for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                    *v = rng.random_range(-bound..bound);
                }
                layer
            })
            .collect();
        Ok(Mlp { activation, layers })
    }

    pub fn from_layers(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        let mlp = Mlp { activation, layers };
        mlp.check()?;
        Ok(mlp)
    }

    pub fn check(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("network has no layers"));
        }
        for l in &self.layers {
            l.check()?;
        }
        for pair in self.layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::invalid("consecutive layer shapes do not chain"));
            }
        }
        if self.layers.last().map(Layer::outputs) != Some(1) {
            return Err(Error::invalid("network output must be scalar"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer, weights before bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        Error::check_dim(self.parameter_count(), flat.len())?;
        let mut rest = flat;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, r) = r.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    fn forward_ws(&self, x: &[f64], ws: &mut Workspace) -> f64 {
        let n = self.layers.len();
        ws.pre.resize_with(n, Vec::new);
        ws.post.resize_with(n, Vec::new);
        for k in 0..n {
            let (done, rest) = ws.post.split_at_mut(k);
            let input = if k == 0 { x } else { done[k - 1].as_slice() };
            self.layers[k].forward_into(input, &mut ws.pre[k]);
            let post = &mut rest[0];
            post.clear();
            if k + 1 == n {
                post.extend_from_slice(&ws.pre[k]);
            } else {
                post.extend(ws.pre[k].iter().map(|&z| self.activation.apply(z)));
            }
        }
        ws.post[n - 1][0]
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Error::check_dim(self.input_dim(), x.len())?;
        Ok(self.forward_ws(x, &mut Workspace::default()))
    }

    /// Mean squared error over the batch and its gradient with respect to
    /// [`Mlp::parameters`], both at the current parameters.
    pub fn loss_and_gradient(&self, inputs: &[&[f64]], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::invalid("batch must be non-empty with one target per input"));
        }
        let d = self.input_dim();
        for x in inputs {
            Error::check_dim(d, x.len())?;
        }
        let n = inputs.len() as f64;
        let mut grad = alloc::vec![0.0; self.parameter_count()];
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let start = *acc;
                *acc += l.weights.len() + l.bias.len();
                Some(start)
            })
            .collect();
        let mut ws = Workspace::default();
        let mut loss = 0.0;
        for (x, &y) in inputs.iter().zip(targets) {
            let q = self.forward_ws(x, &mut ws);
            let err = q - y;
            loss += err * err;
            ws.delta.clear();
            ws.delta.push(2.0 * err / n);
            for k in (0..self.layers.len()).rev() {
                let layer = &self.layers[k];
                let input = if k == 0 { *x } else { ws.post[k - 1].as_slice() };
                let cols = layer.inputs();
                let base = offsets[k];
                for (o, &g) in ws.delta.iter().enumerate() {
                    let row = &mut grad[base + o * cols..base + (o + 1) * cols];
                    for (gw, xi) in row.iter_mut().zip(input) {
                        *gw += g * xi;
                    }
                    grad[base + layer.weights.len() + o] += g;
                }
                if k > 0 {
                    ws.next.clear();
                    ws.next.resize(cols, 0.0);
                    for (o, &g) in ws.delta.iter().enumerate() {
                        let row = &layer.weights[o * cols..(o + 1) * cols];
                        for (acc, w) in ws.next.iter_mut().zip(row) {
                            *acc += g * w;
                        }
                    }
                    for (acc, &z) in ws.next.iter_mut().zip(&ws.pre[k - 1]) {
                        *acc *= self.activation.derivative(z);
                    }
                    core::mem::swap(&mut ws.delta, &mut ws.next);
                }
            }
        }
        let loss = loss / n;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss ({loss})")));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient component {i}")));
        }
        Ok((loss, grad))
    }

    /// One plain gradient-descent step `theta <- theta - lr grad`. Returns the
    /// loss at the pre-update parameters.
    pub fn train_step(&mut self, inputs: &[&[f64]], targets: &[f64], lr: f64) -> Result<f64> {
        let (loss, grad) = self.loss_and_gradient(inputs, targets)?;
        let mut theta = self.parameters();
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= lr * g;
        }
        self.commit(theta)?;
        Ok(loss)
    }

    fn commit(&mut self, theta: Vec<f64>) -> Result<()> {
        if let Some(i) = theta.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {i} after update")));
        }
        self.set_parameters(&theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Gradient steps per campaign iteration.
    pub steps_per_iteration: usize,
    /// Train on every entry of the window each step instead of a sampled batch.
    pub full_batch: bool,
    /// Restrict training to the most recent entries.
    pub window: Option<usize>,
    pub standardize_inputs: bool,
    pub capacity: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: alloc::vec![64, 64],
            activation: Activation::Tanh,
            optimizer: Optimizer::Sgd,
            learning_rate: 1e-3,
            batch_size: 64,
            steps_per_iteration: 1,
            full_batch: false,
            window: None,
            standardize_inputs: false,
            capacity: DEFAULT_CAPACITY,
        }
    }
}

impl ModelConfig {
    /// A local, fast-fitting variant: recent-window full-batch Adam with SiLU.
    pub fn local_fit() -> Self {
        ModelConfig {
            activation: Activation::Silu,
            optimizer: Optimizer::adam(),
            learning_rate: 3e-3,
            batch_size: 32,
            steps_per_iteration: 100,
            full_batch: true,
            window: Some(180),
            standardize_inputs: true,
            ..ModelConfig::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::config("model.hidden", "widths must be positive"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("model.learning_rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("model.batch_size", "must be positive"));
        }
        if self.capacity <= self.batch_size {
            return Err(Error::config("model.capacity", "must exceed the batch size"));
        }
        if self.window.is_some_and(|w| w <= self.batch_size) {
            return Err(Error::config("model.window", "must exceed the batch size"));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(Error::config("model.optimizer", "adam needs betas in [0, 1) and eps > 0"));
            }
        }
        Ok(())
    }
}

/// Affine normalization `(x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const STD_EPS: f64 = 1e-9;

impl Standardizer {
    pub fn identity(d: usize) -> Self {
        Standardizer { mean: alloc::vec![0.0; d], std: alloc::vec![1.0; d] }
    }

    fn fit<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, d: usize) -> Self {
        let mut mean = alloc::vec![0.0; d];
        let mut n = 0.0;
        for r in rows.clone() {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
            n += 1.0;
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = alloc::vec![0.0; d];
        for r in rows {
            for i in 0..d {
                var[i] += (r[i] - mean[i]) * (r[i] - mean[i]);
            }
        }
        let std = var.iter().map(|v| math::sqrt(v / n) + STD_EPS).collect();
        Standardizer { mean, std }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(x.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

/// The critic: network, normalization statistics and optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardModel {
    pub config: ModelConfig,
    pub network: Mlp,
    pub inputs: Standardizer,
    pub target_mean: f64,
    pub target_std: f64,
    adam: Option<AdamState>,
    pub steps: u64,
}

impl RewardModel {
    pub fn new(dimension: usize, config: ModelConfig, rng_seed: u64) -> Result<Self> {
        config.check()?;
        let network = Mlp::new(dimension, &config.hidden, config.activation, rng_seed)?;
        Ok(RewardModel {
            config,
            network,
            inputs: Standardizer::identity(dimension),
            target_mean: 0.0,
            target_std: 1.0,
            adam: None,
            steps: 0,
        })
    }

    pub fn dimension(&self) -> usize {
        self.network.input_dim()
    }

    /// Reward estimate in the original (de-standardized) scale.
    pub fn predict(&self, action: &[f64]) -> Result<f64> {
        Error::check_dim(self.dimension(), action.len())?;
        let mut x = Vec::new();
        self.inputs.apply(action, &mut x);
        Ok(self.network.predict(&x)? * self.target_std + self.target_mean)
    }

    fn training_range(&self, buffer: &ReplayBuffer) -> core::ops::Range<usize> {
        let len = buffer.len();
        let start = self.config.window.map_or(0, |w| len.saturating_sub(w));
        start..len
    }

    /// Runs the configured number of gradient steps on `buffer`. Returns the
    /// mean pre-update loss (standardized units), or `None` while the buffer
    /// is not ready.
    pub fn train(&mut self, buffer: &ReplayBuffer, rng_seed: u64) -> Result<Option<f64>> {
        if !buffer.is_ready(self.config.batch_size) {
            return Ok(None);
        }
        let range = self.training_range(buffer);
        let d = self.dimension();
        let rows = range.clone().map(|i| buffer.get(i).0);
        self.inputs = if self.config.standardize_inputs { Standardizer::fit(rows, d) } else { Standardizer::identity(d) };
        let rewards: Vec<f64> = range.clone().map(|i| buffer.get(i).1).collect();
        self.target_mean = math::mean(&rewards);
        self.target_std = math::std_dev(&rewards) + 1e-12;

        let xs: Vec<Vec<f64>> = range
            .clone()
            .map(|i| {
                let mut x = Vec::with_capacity(d);
                self.inputs.apply(buffer.get(i).0, &mut x);
                x
            })
            .collect();
        let ys: Vec<f64> = rewards.iter().map(|r| (r - self.target_mean) / self.target_std).collect();

        let mut total = 0.0;
        let steps = self.config.steps_per_iteration.max(1);
        for s in 0..steps {
            let loss = if self.config.full_batch {
                let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
                self.step(&refs, &ys)?
            } else {
                let mut rng = seed::rng(rng_seed ^ (s as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
                let idx = rand::seq::index::sample(&mut rng, xs.len(), self.config.batch_size.min(xs.len()));
                let refs: Vec<&[f64]> = idx.iter().map(|i| xs[i].as_slice()).collect();
                let tg: Vec<f64> = idx.iter().map(|i| ys[i]).collect();
                self.step(&refs, &tg)?
            };
            total += loss;
        }
        Ok(Some(total / steps as f64))
    }

    fn step(&mut self, inputs: &[&[f64]], targets: &[f64]) -> Result<f64> {
        let lr = self.config.learning_rate;
        let loss = match self.config.optimizer {
            Optimizer::Sgd => self.network.train_step(inputs, targets, lr)?,
            Optimizer::Adam { beta1, beta2, eps } => {
                let (loss, grad) = self.network.loss_and_gradient(inputs, targets)?;
                let p = grad.len();
                let st = self.adam.get_or_insert_with(|| AdamState {
                    m: alloc::vec![0.0; p],
                    v: alloc::vec![0.0; p],
                    t: 0,
                });
                st.t += 1;
                let c1 = 1.0 - libm::pow(beta1, st.t as f64);
                let c2 = 1.0 - libm::pow(beta2, st.t as f64);
                let mut theta = self.network.parameters();
                for i in 0..p {
                    st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * grad[i];
                    st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    theta[i] -= lr * (st.m[i] / c1) / (math::sqrt(st.v[i] / c2) + eps);
                }
                self.network.commit(theta)?;
                loss
            }
        };
        self.steps += 1;
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn linear(w: Vec<f64>, b: f64) -> Mlp {
        let n = w.len();
        Mlp::from_layers(vec![Layer { shape: [1, n], weights: w, bias: vec![b] }], Activation::Tanh).unwrap()
    }

    #[test]
    fn predict_examples() {
        assert_eq!(linear(vec![1.0, 2.0], 0.5).predict(&[1.0, 1.0]).unwrap(), 3.5);
        let mut zero = Mlp::new(3, &[4, 4], Activation::Tanh, 1).unwrap();
        zero.set_parameters(&vec![0.0; zero.parameter_count()]).unwrap();
        assert_eq!(zero.predict(&[0.3, -9.0, 2.0]).unwrap(), 0.0);
        assert!(zero.predict(&[1.0]).is_err());
    }

    #[test]
    fn scalar_gradient_step() {
        let mut m = linear(vec![0.0], 0.0);
        let loss = m.train_step(&[&[1.0]], &[2.0], 0.1).unwrap();
        assert_eq!(loss, 4.0);
        assert!((m.layers[0].weights[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_when_targets_match() {
        let mut m = Mlp::new(2, &[3], Activation::Silu, 5).unwrap();
        let xs: [&[f64]; 2] = [&[0.1, 0.2], &[-0.3, 0.7]];
        let ys: Vec<f64> = xs.iter().map(|x| m.predict(x).unwrap()).collect();
        let before = m.parameters();
        assert_eq!(m.train_step(&xs, &ys, 0.5).unwrap(), 0.0);
        assert_eq!(m.parameters(), before);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let mut m = linear(vec![1.0], 0.0);
        assert!(matches!(m.train_step(&[&[f64::INFINITY]], &[0.0], 0.1), Err(Error::NonFinite(_))));
    }

    #[test]
    fn buffer_readiness_and_fifo() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(vec![i as f64], i as f64);
        }
        assert_eq!(b.len(), 3);
        assert_eq!(b.inserted(), 5);
        assert_eq!(b.get(0).1, 2.0);

        let mut b = ReplayBuffer::new(100);
        for i in 0..10 {
            b.push(vec![0.0], i as f64);
        }
        assert!(sample_batch(&b, 10, 1).is_none());
        b.push(vec![0.0], 10.0);
        let batch = sample_batch(&b, 10, 1).unwrap();
        let mut sorted = batch.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
        assert_eq!(sample_batch(&b, 10, 1).unwrap(), batch);
    }
}
