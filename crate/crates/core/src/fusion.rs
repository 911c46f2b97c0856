//! The fusion network: whitening, a ReLU hidden layer over the concatenated
//! adjective and noun probabilities, and a softmax classifier over ANPs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::Sample;
use crate::metrics::topk_hit;
use crate::nn::{cross_entropy, glorot_init, softmax, DenseLayer, Gradients, ReluMlp, SgdState};
use crate::{Error, Result};

/// Lower clamp on whitening standard deviations.
pub const MIN_STD: f32 = 1e-6;
/// Slack allowed outside `[0, 1]` on input probabilities.
pub const PROB_TOLERANCE: f32 = 1e-6;

/// Per-dimension standardization fitted on the training inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Whitener {
    mean: Vec<f32>,
    std: Vec<f32>,
}

impl Whitener {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Clamps `std` below at [`MIN_STD`].
    pub fn new(mean: Vec<f32>, std: Vec<f32>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::shape("whitener std", mean.len(), std.len()));
        }
        if !mean.iter().chain(&std).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("whitener statistics".into()));
        }
        let std = std.into_iter().map(|s| s.max(MIN_STD)).collect();
        Ok(Self { mean, std })
    }

    /// Mean and population standard deviation per dimension.
    pub fn fit<I: AsRef<[f32]>>(inputs: &[I]) -> Result<Self> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::InvalidInput("cannot fit whitener on zero samples".into()))?;
        let dim = first.as_ref().len();
        let n = inputs.len() as f64;
        let mut mean = vec![0f64; dim];
        for x in inputs {
            let x = x.as_ref();
            if x.len() != dim {
                return Err(Error::shape("whitener input", dim, x.len()));
            }
            for (m, &v) in mean.iter_mut().zip(x) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0f64; dim];
        for x in inputs {
            for ((s, &v), m) in var.iter_mut().zip(x.as_ref()).zip(&mean) {
                *s += (v as f64 - m).powi(2);
            }
        }
        Self::new(
            mean.iter().map(|&m| m as f32).collect(),
            var.iter().map(|&v| (v / n).sqrt() as f32).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f32] {
        &self.mean
    }

    pub fn std(&self) -> &[f32] {
        &self.std
    }

    pub fn apply(&self, x: &[f32]) -> Vec<f32> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }
}

/// `(n_adj, n_noun, hidden, n_anp)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionDims {
    pub n_adj: usize,
    pub n_noun: usize,
    pub hidden: usize,
    pub n_anp: usize,
}

impl FusionDims {
    /// 117 adjectives, 167 nouns, 1024 hidden units, 553 ANPs.
    pub const REFERENCE: FusionDims = FusionDims {
        n_adj: 117,
        n_noun: 167,
        hidden: 1024,
        n_anp: 553,
    };

    pub fn new(n_adj: usize, n_noun: usize, hidden: usize, n_anp: usize) -> Self {
        Self {
            n_adj,
            n_noun,
            hidden,
            n_anp,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.n_adj + self.n_noun
    }

    fn validate(&self) -> Result<()> {
        if self.n_adj == 0 || self.n_noun == 0 || self.hidden == 0 || self.n_anp == 0 {
            return Err(Error::InvalidInput(format!(
                "all dimensions must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Maps adjective and noun probability vectors to ANP probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionNetwork {
    dims: FusionDims,
    whitener: Whitener,
    mlp: ReluMlp<f32>,
}

impl FusionNetwork {
    /// Glorot-initialized layers, zero biases, identity whitener.
    pub fn build(dims: FusionDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = glorot_init(dims.input_dim(), dims.hidden, &mut rng);
        let output = glorot_init(dims.hidden, dims.n_anp, &mut rng);
        Self::from_parts(dims, Whitener::identity(dims.input_dim()), hidden, output)
    }

    pub fn from_parts(
        dims: FusionDims,
        whitener: Whitener,
        hidden: DenseLayer<f32>,
        output: DenseLayer<f32>,
    ) -> Result<Self> {
        dims.validate()?;
        if whitener.dim() != dims.input_dim() {
            return Err(Error::shape("whitener", dims.input_dim(), whitener.dim()));
        }
        if hidden.fan_in() != dims.input_dim() || hidden.fan_out() != dims.hidden {
            return Err(Error::shape(
                "hidden layer",
                dims.input_dim() * dims.hidden,
                hidden.weights().len(),
            ));
        }
        if output.fan_in() != dims.hidden || output.fan_out() != dims.n_anp {
            return Err(Error::shape(
                "output layer",
                dims.hidden * dims.n_anp,
                output.weights().len(),
            ));
        }
        Ok(Self {
            dims,
            whitener,
            mlp: ReluMlp::new(hidden, output)?,
        })
    }

    pub fn dims(&self) -> FusionDims {
        self.dims
    }

    pub fn whitener(&self) -> &Whitener {
        &self.whitener
    }

    pub fn set_whitener(&mut self, whitener: Whitener) -> Result<()> {
        if whitener.dim() != self.dims.input_dim() {
            return Err(Error::shape("whitener", self.dims.input_dim(), whitener.dim()));
        }
        self.whitener = whitener;
        Ok(())
    }

    pub fn hidden(&self) -> &DenseLayer<f32> {
        self.mlp.hidden()
    }

    pub fn output(&self) -> &DenseLayer<f32> {
        self.mlp.output()
    }

    pub fn mlp(&self) -> &ReluMlp<f32> {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut ReluMlp<f32> {
        &mut self.mlp
    }

    /// Checks lengths and probability bounds, returns the concatenated input.
    pub fn validate_inputs(&self, adj_probs: &[f32], noun_probs: &[f32]) -> Result<Vec<f32>> {
        if adj_probs.len() != self.dims.n_adj {
            return Err(Error::shape(
                "adjective probabilities",
                self.dims.n_adj,
                adj_probs.len(),
            ));
        }
        if noun_probs.len() != self.dims.n_noun {
            return Err(Error::shape("noun probabilities", self.dims.n_noun, noun_probs.len()));
        }
        let mut x = Vec::with_capacity(self.dims.input_dim());
        x.extend_from_slice(adj_probs);
        x.extend_from_slice(noun_probs);
        if let Some(bad) = x
            .iter()
            .find(|&&p| !(-PROB_TOLERANCE..=1.0 + PROB_TOLERANCE).contains(&p))
        {
            return Err(Error::InvalidInput(format!("probability {bad} outside [0, 1]")));
        }
        Ok(x)
    }

    /// Pre-softmax ANP scores.
    pub fn logits(&self, adj_probs: &[f32], noun_probs: &[f32]) -> Result<Vec<f32>> {
        let x = self.validate_inputs(adj_probs, noun_probs)?;
        self.mlp.logits(&self.whitener.apply(&x))
    }

    /// ANP probabilities for one observation.
    pub fn predict(&self, adj_probs: &[f32], noun_probs: &[f32]) -> Result<Vec<f64>> {
        let logits = self.logits(adj_probs, noun_probs)?;
        let logits: Vec<f64> = logits.iter().map(|&z| z as f64).collect();
        Ok(softmax(&logits))
    }

    pub fn predict_sample(&self, sample: &Sample) -> Result<Vec<f64>> {
        self.predict(&sample.adj_probs, &sample.noun_probs)
    }

    /// Predictions for every sample, in input order.
    pub fn predict_batch(&self, samples: &[Sample]) -> Result<Vec<Vec<f64>>> {
        samples.par_iter().map(|s| self.predict_sample(s)).collect()
    }
}

fn default_epochs() -> usize {
    30
}
fn default_batch_size() -> usize {
    128
}
fn default_learning_rate() -> f64 {
    0.01
}
fn default_momentum() -> f64 {
    0.9
}
fn default_weight_decay() -> f64 {
    1e-4
}
fn default_shuffle() -> bool {
    true
}

/// Optimization settings. Defaults: 30 epochs, batches of 128, learning rate
/// 0.01, momentum 0.9, weight decay 1e-4, shuffling on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    pub seed: u64,
    #[serde(default = "default_shuffle")]
    pub shuffle: bool,
    /// Fraction of the training samples held out for per-epoch validation.
    #[serde(default)]
    pub validation_fraction: Option<f64>,
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            momentum: default_momentum(),
            weight_decay: default_weight_decay(),
            seed,
            shuffle: default_shuffle(),
            validation_fraction: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidInput("epochs and batch_size must be positive".into()));
        }
        if let Some(f) = self.validation_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidInput(format!("validation fraction {f} not in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Metrics recorded after each epoch. Accuracies are percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_top1: f64,
    pub val_loss: Option<f64>,
    pub val_top1: Option<f64>,
    pub val_top5: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }
}

/// Mean loss and top-1/top-5 accuracy (percent).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossAccuracy {
    pub loss: f64,
    pub top1: f64,
    pub top5: f64,
}

/// Mean cross-entropy and top-1/top-5 accuracy of `net` on `samples`.
pub fn evaluate(net: &FusionNetwork, samples: &[Sample]) -> Result<LossAccuracy> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate on zero samples".into()));
    }
    let preds = net.predict_batch(samples)?;
    let (mut loss, mut top1, mut top5) = (0.0, 0usize, 0usize);
    for (p, s) in preds.iter().zip(samples) {
        loss += cross_entropy(p, s.anp())?;
        top1 += topk_hit(p, s.anp(), 1)? as usize;
        top5 += topk_hit(p, s.anp(), 5)? as usize;
    }
    let n = samples.len() as f64;
    Ok(LossAccuracy {
        loss: loss / n,
        top1: 100.0 * top1 as f64 / n,
        top5: 100.0 * top5 as f64 / n,
    })
}

/// Fits the whitener on the training portion, then runs minibatch SGD on the
/// layers. The whitener is not touched after fitting.
pub fn train(net: &mut FusionNetwork, samples: &[Sample], config: &TrainConfig) -> Result<TrainHistory> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidInput("cannot train on zero samples".into()));
    }
    let dims = net.dims;
    let inputs = samples
        .iter()
        .map(|s| {
            if s.anp() >= dims.n_anp {
                return Err(Error::OutOfRange {
                    what: "ANP label",
                    index: s.anp(),
                    len: dims.n_anp,
                });
            }
            net.validate_inputs(&s.adj_probs, &s.noun_probs)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let (train_idx, val_idx) = match config.validation_fraction {
        Some(f) => {
            order.shuffle(&mut rng);
            let n_val = ((f * samples.len() as f64).ceil() as usize).min(samples.len() - 1);
            let (val, train) = order.split_at(n_val);
            let (mut train, mut val) = (train.to_vec(), val.to_vec());
            train.sort_unstable();
            val.sort_unstable();
            (train, val)
        }
        None => (order, Vec::new()),
    };
    if train_idx.is_empty() {
        return Err(Error::InvalidInput(
            "no training samples left after validation split".into(),
        ));
    }

    let train_inputs: Vec<&[f32]> = train_idx.iter().map(|&i| inputs[i].as_slice()).collect();
    net.whitener = Whitener::fit(&train_inputs)?;
    let whitened: Vec<Vec<f32>> = train_inputs.iter().map(|x| net.whitener.apply(x)).collect();
    let labels: Vec<usize> = train_idx.iter().map(|&i| samples[i].anp()).collect();
    let val_samples: Vec<Sample> = val_idx.iter().map(|&i| samples[i].clone()).collect();

    let mut sgd = SgdState::new(config.learning_rate, config.momentum, config.weight_decay, &net.mlp)?;
    let mut grads = Gradients::zeros_like(&net.mlp);
    let mut history = TrainHistory::default();
    let mut epoch_order: Vec<usize> = (0..whitened.len()).collect();

    for epoch in 1..=config.epochs {
        if config.shuffle {
            epoch_order.shuffle(&mut rng);
        }
        let (mut loss_sum, mut hits) = (0f64, 0usize);
        for (batch_no, batch) in epoch_order.chunks(config.batch_size).enumerate() {
            grads.fill_zero();
            let mut batch_loss = 0f64;
            for &i in batch {
                let acts = net.mlp.forward_record(whitened[i].clone())?;
                batch_loss += cross_entropy(&acts.probs, labels[i])? as f64;
                hits += topk_hit(&acts.logits, labels[i], 1)? as usize;
                net.mlp.backward_accumulate(&acts, labels[i], &mut grads)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss at epoch {epoch}, batch {}",
                    batch_no + 1
                )));
            }
            grads.scale(1.0 / batch.len() as f32);
            sgd.step(&mut net.mlp, &grads).map_err(|e| match e {
                Error::NonFinite(what) => Error::NonFinite(format!("{what} at epoch {epoch}, batch {}", batch_no + 1)),
                other => other,
            })?;
            loss_sum += batch_loss;
        }
        let n = whitened.len() as f64;
        let val = if val_samples.is_empty() {
            None
        } else {
            Some(evaluate(net, &val_samples)?)
        };
        history.epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / n,
            train_top1: 100.0 * hits as f64 / n,
            val_loss: val.map(|v| v.loss),
            val_top1: val.map(|v| v.top1),
            val_top5: val.map(|v| v.top5),
        });
    }
    Ok(history)
}
