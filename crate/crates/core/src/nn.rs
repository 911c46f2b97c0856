//! Dense-network math for the fixed fusion topology.
//!
//! Everything here is generic over [`Scalar`] so the same code runs in `f32`
//! for training and in `f64` for gradient checking. Weight matrices are stored
//! row-major with shape `(fan_out, fan_in)`.
//!
//! The only differentiable graph is
//! `cross_entropy ∘ softmax ∘ dense ∘ relu ∘ dense`, exposed as [`ReluMlp`].

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::distr::{Distribution, Uniform};
use rand::Rng;

use crate::{Error, Result};

/// Floating point type usable for parameters and activations.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Sum + Debug + Default + Send + Sync + 'static {
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to any float")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Clamp applied to the target probability before taking the log.
pub const CROSS_ENTROPY_CLAMP: f64 = 1e-12;

/// A fully connected affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T = f32> {
    fan_in: usize,
    fan_out: usize,
    weights: Vec<T>,
    biases: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    /// Builds a layer from row-major weights of shape `(fan_out, fan_in)`.
    pub fn new(fan_in: usize, fan_out: usize, weights: Vec<T>, biases: Vec<T>) -> Result<Self> {
        if fan_in == 0 || fan_out == 0 {
            return Err(Error::InvalidInput(format!(
                "layer dimensions must be positive, got {fan_out}x{fan_in}"
            )));
        }
        if weights.len() != fan_in * fan_out {
            return Err(Error::shape("layer weights", fan_in * fan_out, weights.len()));
        }
        if biases.len() != fan_out {
            return Err(Error::shape("layer biases", fan_out, biases.len()));
        }
        if !weights.iter().chain(&biases).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(Self {
            fan_in,
            fan_out,
            weights,
            biases,
        })
    }

    /// Builds a layer from one weight row per output unit.
    pub fn from_rows(rows: &[Vec<T>], biases: Vec<T>) -> Result<Self> {
        let fan_in = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != fan_in) {
            return Err(Error::shape("layer row", fan_in, bad.len()));
        }
        let weights = rows.iter().flatten().copied().collect();
        Self::new(fan_in, rows.len(), weights, biases)
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        assert!(fan_in >= 1 && fan_out >= 1, "layer dimensions must be positive");
        Self {
            fan_in,
            fan_out,
            weights: vec![T::zero(); fan_in * fan_out],
            biases: vec![T::zero(); fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.fan_in
    }

    pub fn fan_out(&self) -> usize {
        self.fan_out
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn biases(&self) -> &[T] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [T] {
        &mut self.biases
    }

    pub fn weight(&self, out: usize, inp: usize) -> T {
        self.weights[out * self.fan_in + inp]
    }

    pub fn row(&self, out: usize) -> &[T] {
        &self.weights[out * self.fan_in..(out + 1) * self.fan_in]
    }

    /// `output_j = bias_j + Σ_i weight_ji · input_i`.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        if input.len() != self.fan_in {
            return Err(Error::shape("dense input", self.fan_in, input.len()));
        }
        if !input.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("dense input".into()));
        }
        let mut out = vec![T::zero(); self.fan_out];
        self.forward_into(input, &mut out);
        Ok(out)
    }

    pub(crate) fn forward_into(&self, input: &[T], out: &mut [T]) {
        debug_assert_eq!(input.len(), self.fan_in);
        debug_assert_eq!(out.len(), self.fan_out);
        for (j, (o, row)) in out.iter_mut().zip(self.weights.chunks_exact(self.fan_in)).enumerate() {
            let mut acc = self.biases[j];
            for (&w, &x) in row.iter().zip(input) {
                acc = acc + w * x;
            }
            *o = acc;
        }
    }

    /// Converts every parameter to another float type.
    pub fn cast<U: Scalar>(&self) -> DenseLayer<U> {
        DenseLayer {
            fan_in: self.fan_in,
            fan_out: self.fan_out,
            weights: self.weights.iter().map(|w| U::of(w.as_f64())).collect(),
            biases: self.biases.iter().map(|b| U::of(b.as_f64())).collect(),
        }
    }
}

/// Glorot/Xavier uniform initialization with zero biases.
///
/// Weights are drawn from `U[-√(6/(fan_in+fan_out)), +√(6/(fan_in+fan_out))]`.
///
/// # Panics
///
/// Panics if either count is zero.
pub fn glorot_init<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> DenseLayer<f32> {
    assert!(fan_in >= 1 && fan_out >= 1, "layer dimensions must be positive");
    let bound = glorot_bound(fan_in, fan_out);
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let weights = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
    DenseLayer {
        fan_in,
        fan_out,
        weights,
        biases: vec![0.0; fan_out],
    }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f32 {
    (6.0 / (fan_in + fan_out) as f64).sqrt() as f32
}

pub fn relu<T: Scalar>(input: &[T]) -> Vec<T> {
    input.iter().map(|&x| x.max(T::zero())).collect()
}

/// Max-subtracted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut out: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = out.iter().copied().sum();
    for p in &mut out {
        *p = *p / total;
    }
    out
}

/// `−ln(max(p_label, 1e-12))`.
pub fn cross_entropy<T: Scalar>(probabilities: &[T], label: usize) -> Result<T> {
    let p = *probabilities.get(label).ok_or(Error::OutOfRange {
        what: "class label",
        index: label,
        len: probabilities.len(),
    })?;
    Ok(-p.max(T::of(CROSS_ENTROPY_CLAMP)).ln())
}

/// Two dense layers with a ReLU in between: the trainable part of the fusion
/// network.
#[derive(Debug, Clone)]
pub struct ReluMlp<T = f32> {
    hidden: DenseLayer<T>,
    output: DenseLayer<T>,
    revision: u64,
}

impl<T: PartialEq> PartialEq for ReluMlp<T> {
    fn eq(&self, other: &Self) -> bool {
        self.hidden == other.hidden && self.output == other.output
    }
}

/// Everything recorded by a forward pass that `backward` needs.
#[derive(Debug, Clone)]
pub struct Activations<T> {
    revision: u64,
    pub input: Vec<T>,
    pub hidden_pre: Vec<T>,
    pub hidden: Vec<T>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
}

/// Parameter-shaped buffers: gradients, or optimizer velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub hidden_weights: Vec<T>,
    pub hidden_biases: Vec<T>,
    pub output_weights: Vec<T>,
    pub output_biases: Vec<T>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(mlp: &ReluMlp<T>) -> Self {
        Self {
            hidden_weights: vec![T::zero(); mlp.hidden.weights.len()],
            hidden_biases: vec![T::zero(); mlp.hidden.biases.len()],
            output_weights: vec![T::zero(); mlp.output.weights.len()],
            output_biases: vec![T::zero(); mlp.output.biases.len()],
        }
    }

    fn buffers(&self) -> [&Vec<T>; 4] {
        [
            &self.hidden_weights,
            &self.hidden_biases,
            &self.output_weights,
            &self.output_biases,
        ]
    }

    fn buffers_mut(&mut self) -> [&mut Vec<T>; 4] {
        [
            &mut self.hidden_weights,
            &mut self.hidden_biases,
            &mut self.output_weights,
            &mut self.output_biases,
        ]
    }

    pub fn scale(&mut self, factor: T) {
        for buf in self.buffers_mut() {
            buf.iter_mut().for_each(|g| *g = *g * factor);
        }
    }

    pub fn fill_zero(&mut self) {
        for buf in self.buffers_mut() {
            buf.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    pub fn is_finite(&self) -> bool {
        self.buffers().iter().all(|b| b.iter().all(|g| g.is_finite()))
    }

    /// Same order as [`ReluMlp::to_flat`].
    pub fn to_flat(&self) -> Vec<T> {
        self.buffers().iter().flat_map(|b| b.iter().copied()).collect()
    }
}

impl<T: Scalar> ReluMlp<T> {
    pub fn new(hidden: DenseLayer<T>, output: DenseLayer<T>) -> Result<Self> {
        if output.fan_in != hidden.fan_out {
            return Err(Error::shape("output layer fan-in", hidden.fan_out, output.fan_in));
        }
        Ok(Self {
            hidden,
            output,
            revision: 0,
        })
    }

    pub fn hidden(&self) -> &DenseLayer<T> {
        &self.hidden
    }

    pub fn output(&self) -> &DenseLayer<T> {
        &self.output
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.fan_in
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden.fan_out
    }

    pub fn output_dim(&self) -> usize {
        self.output.fan_out
    }

    /// Incremented on every parameter update.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Mutable access to both layers. Counts as a parameter update.
    pub fn layers_mut(&mut self) -> (&mut DenseLayer<T>, &mut DenseLayer<T>) {
        self.revision += 1;
        (&mut self.hidden, &mut self.output)
    }

    pub fn num_params(&self) -> usize {
        self.hidden.weights.len() + self.hidden.biases.len() + self.output.weights.len() + self.output.biases.len()
    }

    /// Parameters flattened as hidden weights, hidden biases, output weights,
    /// output biases.
    pub fn to_flat(&self) -> Vec<T> {
        self.hidden
            .weights
            .iter()
            .chain(&self.hidden.biases)
            .chain(&self.output.weights)
            .chain(&self.output.biases)
            .copied()
            .collect()
    }

    pub fn set_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::shape("flat parameter vector", self.num_params(), flat.len()));
        }
        let mut rest = flat;
        for buf in [
            &mut self.hidden.weights,
            &mut self.hidden.biases,
            &mut self.output.weights,
            &mut self.output.biases,
        ] {
            let (head, tail) = rest.split_at(buf.len());
            buf.copy_from_slice(head);
            rest = tail;
        }
        self.revision += 1;
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ReluMlp<U> {
        ReluMlp {
            hidden: self.hidden.cast(),
            output: self.output.cast(),
            revision: 0,
        }
    }

    pub fn logits(&self, input: &[T]) -> Result<Vec<T>> {
        let hidden = relu(&self.hidden.forward(input)?);
        let mut logits = vec![T::zero(); self.output.fan_out];
        self.output.forward_into(&hidden, &mut logits);
        Ok(logits)
    }

    /// Forward pass that keeps every intermediate for [`ReluMlp::backward`].
    pub fn forward_record(&self, input: Vec<T>) -> Result<Activations<T>> {
        let hidden_pre = self.hidden.forward(&input)?;
        let hidden = relu(&hidden_pre);
        let mut logits = vec![T::zero(); self.output.fan_out];
        self.output.forward_into(&hidden, &mut logits);
        let probs = softmax(&logits);
        Ok(Activations {
            revision: self.revision,
            input,
            hidden_pre,
            hidden,
            logits,
            probs,
        })
    }

    pub fn loss(&self, input: &[T], label: usize) -> Result<T> {
        let logits = self.logits(input)?;
        cross_entropy(&softmax(&logits), label)
    }

    /// Exact gradients of the cross-entropy loss for one recorded sample.
    pub fn backward(&self, acts: &Activations<T>, label: usize) -> Result<Gradients<T>> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_accumulate(acts, label, &mut grads)?;
        Ok(grads)
    }

    /// Adds one sample's gradients into `grads`.
    pub fn backward_accumulate(&self, acts: &Activations<T>, label: usize, grads: &mut Gradients<T>) -> Result<()> {
        if acts.revision != self.revision {
            return Err(Error::StaleActivations {
                recorded: acts.revision,
                current: self.revision,
            });
        }
        let (n_in, n_hid, n_out) = (self.input_dim(), self.hidden_dim(), self.output_dim());
        if acts.input.len() != n_in
            || acts.hidden.len() != n_hid
            || acts.hidden_pre.len() != n_hid
            || acts.probs.len() != n_out
        {
            return Err(Error::InvalidInput(
                "activation record does not match network shape".into(),
            ));
        }
        if label >= n_out {
            return Err(Error::OutOfRange {
                what: "class label",
                index: label,
                len: n_out,
            });
        }
        if grads.hidden_weights.len() != self.hidden.weights.len()
            || grads.output_weights.len() != self.output.weights.len()
        {
            return Err(Error::InvalidInput(
                "gradient buffer does not match network shape".into(),
            ));
        }

        // d loss / d logits = p − onehot(label)
        let mut delta_out = acts.probs.clone();
        delta_out[label] = delta_out[label] - T::one();

        let mut delta_hidden = vec![T::zero(); n_hid];
        for (k, &d) in delta_out.iter().enumerate() {
            grads.output_biases[k] = grads.output_biases[k] + d;
            let grow = &mut grads.output_weights[k * n_hid..(k + 1) * n_hid];
            for (g, &h) in grow.iter_mut().zip(&acts.hidden) {
                *g = *g + d * h;
            }
            for (acc, &w) in delta_hidden.iter_mut().zip(self.output.row(k)) {
                *acc = *acc + w * d;
            }
        }

        for (j, d) in delta_hidden.iter_mut().enumerate() {
            if acts.hidden_pre[j] <= T::zero() {
                continue;
            }
            grads.hidden_biases[j] = grads.hidden_biases[j] + *d;
            let grow = &mut grads.hidden_weights[j * n_in..(j + 1) * n_in];
            for (g, &x) in grow.iter_mut().zip(&acts.input) {
                *g = *g + *d * x;
            }
        }
        Ok(())
    }

    /// Mean gradients and mean loss over a batch.
    pub fn batch_gradients(&self, inputs: &[&[T]], labels: &[usize]) -> Result<(Gradients<T>, T)> {
        let mut grads = Gradients::zeros_like(self);
        let loss = self.batch_gradients_into(inputs, labels, &mut grads)?;
        Ok((grads, loss))
    }

    pub(crate) fn batch_gradients_into(
        &self,
        inputs: &[&[T]],
        labels: &[usize],
        grads: &mut Gradients<T>,
    ) -> Result<T> {
        if inputs.len() != labels.len() {
            return Err(Error::shape("batch labels", inputs.len(), labels.len()));
        }
        if inputs.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        grads.fill_zero();
        let mut loss = T::zero();
        for (&x, &y) in inputs.iter().zip(labels) {
            let acts = self.forward_record(x.to_vec())?;
            loss = loss + cross_entropy(&acts.probs, y)?;
            self.backward_accumulate(&acts, y, grads)?;
        }
        let n = T::of(inputs.len() as f64);
        grads.scale(T::one() / n);
        Ok(loss / n)
    }
}

/// SGD with momentum and L2 weight decay on weights (not biases).
#[derive(Debug, Clone)]
pub struct SgdState<T = f32> {
    learning_rate: T,
    momentum: T,
    weight_decay: T,
    velocity: Gradients<T>,
}

impl<T: Scalar> SgdState<T> {
    pub fn new(learning_rate: f64, momentum: f64, weight_decay: f64, mlp: &ReluMlp<T>) -> Result<Self> {
        if !(learning_rate.is_finite() && learning_rate >= 0.0) {
            return Err(Error::InvalidInput(format!("learning rate {learning_rate}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidInput(format!("momentum {momentum} not in [0, 1)")));
        }
        if !(weight_decay.is_finite() && weight_decay >= 0.0) {
            return Err(Error::InvalidInput(format!("weight decay {weight_decay}")));
        }
        Ok(Self {
            learning_rate: T::of(learning_rate),
            momentum: T::of(momentum),
            weight_decay: T::of(weight_decay),
            velocity: Gradients::zeros_like(mlp),
        })
    }

    pub fn velocity(&self) -> &Gradients<T> {
        &self.velocity
    }

    /// `g' = g + wd·θ` (weights only); `v ← μ·v + g'`; `θ ← θ − lr·v`.
    pub fn step(&mut self, mlp: &mut ReluMlp<T>, grads: &Gradients<T>) -> Result<()> {
        if grads.hidden_weights.len() != mlp.hidden.weights.len()
            || grads.hidden_biases.len() != mlp.hidden.biases.len()
            || grads.output_weights.len() != mlp.output.weights.len()
            || grads.output_biases.len() != mlp.output.biases.len()
        {
            return Err(Error::InvalidInput("gradient shapes do not match parameters".into()));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        let (lr, mu, wd) = (self.learning_rate, self.momentum, self.weight_decay);
        let update = |params: &mut [T], grads: &[T], vel: &mut [T], decay: T| {
            for ((p, &g), v) in params.iter_mut().zip(grads).zip(vel.iter_mut()) {
                let g = g + decay * *p;
                *v = mu * *v + g;
                *p = *p - lr * *v;
            }
        };
        update(
            &mut mlp.hidden.weights,
            &grads.hidden_weights,
            &mut self.velocity.hidden_weights,
            wd,
        );
        update(
            &mut mlp.hidden.biases,
            &grads.hidden_biases,
            &mut self.velocity.hidden_biases,
            T::zero(),
        );
        update(
            &mut mlp.output.weights,
            &grads.output_weights,
            &mut self.velocity.output_weights,
            wd,
        );
        update(
            &mut mlp.output.biases,
            &grads.output_biases,
            &mut self.velocity.output_biases,
            T::zero(),
        );
        mlp.revision += 1;
        Ok(())
    }
}

/// Central finite differences `(L(θ+ε) − L(θ−ε)) / 2ε` for every parameter.
pub fn finite_diff_grad<F>(mut loss: F, params: &[f64], epsilon: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + epsilon;
            let up = loss(&probe);
            probe[i] = orig - epsilon;
            let down = loss(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * epsilon)
        })
        .collect()
}
