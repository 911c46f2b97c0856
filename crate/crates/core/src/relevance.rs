//! Deep Taylor relevance for the fusion network.
//!
//! Relevance starts at the clamped pre-softmax score of the target ANP, goes
//! through the output layer with the z⁺ rule and through the (whitening-folded)
//! hidden layer with the zᴮ rule over the box `[0, 1]`, and ends as one value
//! per adjective and noun probability. Biases take no share. All arithmetic is
//! done in `f64`.

use crate::dataio::Sample;
use crate::fusion::FusionNetwork;
use crate::nn::{relu, DenseLayer};
use crate::{Error, Result};

/// Lower bound on every non-zero redistribution denominator.
pub const STABILIZER: f64 = 1e-9;
/// Tolerance on non-negative activations and on the `[0, 1]` input box.
pub const BOUND_TOLERANCE: f64 = 1e-6;
const NEGATIVE_ACTIVATION_TOLERANCE: f64 = 1e-9;

/// Adjective and noun contributions for one (input, target ANP) query.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceReport {
    pub target_anp: usize,
    pub root_relevance: f64,
    pub adj_contrib: Vec<f64>,
    pub noun_contrib: Vec<f64>,
    /// Relevance was not fully propagated: the target score was not positive,
    /// no hidden unit feeds it through a positive weight, or some unit's
    /// redistribution denominator vanished (e.g. inputs pinned to a corner of
    /// the box). Contributions are still reported but do not sum to the root.
    pub degenerate: bool,
}

impl RelevanceReport {
    pub fn adj_total(&self) -> f64 {
        self.adj_contrib.iter().sum()
    }

    pub fn noun_total(&self) -> f64 {
        self.noun_contrib.iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.adj_total() + self.noun_total()
    }

    /// `|Σ contributions − root| / root`, zero for a zero root.
    pub fn conservation_error(&self) -> f64 {
        if self.root_relevance == 0.0 {
            return self.total().abs();
        }
        (self.total() - self.root_relevance).abs() / self.root_relevance
    }

    /// Multiplies the root and every contribution by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            root_relevance: self.root_relevance * factor,
            adj_contrib: self.adj_contrib.iter().map(|c| c * factor).collect(),
            noun_contrib: self.noun_contrib.iter().map(|c| c * factor).collect(),
            ..self.clone()
        }
    }
}

/// Hidden layer over raw probabilities, equivalent to whitening followed by
/// the original hidden layer: `w'_ji = w_ji/σ_i`, `b'_j = b_j − Σ_i w_ji·μ_i/σ_i`.
pub fn fold_whitening(net: &FusionNetwork) -> DenseLayer<f64> {
    let hidden = net.hidden();
    let (mean, std) = (net.whitener().mean(), net.whitener().std());
    let n_in = hidden.fan_in();
    let mut weights = Vec::with_capacity(hidden.weights().len());
    let mut biases = Vec::with_capacity(hidden.fan_out());
    for j in 0..hidden.fan_out() {
        let mut b = hidden.biases()[j] as f64;
        for i in 0..n_in {
            let w = hidden.weight(j, i) as f64 / std[i] as f64;
            b -= w * mean[i] as f64;
            weights.push(w);
        }
        biases.push(b);
    }
    DenseLayer::new(n_in, hidden.fan_out(), weights, biases).expect("folded layer keeps shape")
}

/// z⁺ rule: `R_i = Σ_j x_i·w⁺_ji / max(Σ_i' x_i'·w⁺_ji', ε) · R_j`.
///
/// Output units whose positive pre-activation sum is exactly zero pass on
/// nothing.
pub fn zplus_backprop(layer: &DenseLayer<f64>, input: &[f64], output_relevance: &[f64]) -> Result<Vec<f64>> {
    zplus_tracked(layer, input, output_relevance).map(|(r, _)| r)
}

/// Relevance that a redistribution could not pass on: all of `r_j` when the
/// denominator is zero, the share cut off by the stabilizer floor otherwise.
fn dropped(r_j: f64, denom: f64) -> f64 {
    if denom == 0.0 {
        r_j
    } else {
        r_j * (1.0 - denom / denom.max(STABILIZER))
    }
}

fn zplus_tracked(layer: &DenseLayer<f64>, input: &[f64], output_relevance: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_lengths(layer, input, output_relevance)?;
    if let Some(bad) = input.iter().find(|&&x| x < -NEGATIVE_ACTIVATION_TOLERANCE) {
        return Err(Error::InvalidInput(format!(
            "z+ rule needs non-negative inputs, got {bad}"
        )));
    }
    let x: Vec<f64> = input.iter().map(|&v| v.max(0.0)).collect();
    let mut r_in = vec![0.0; layer.fan_in()];
    let mut lost = 0.0;
    for (j, &r_j) in output_relevance.iter().enumerate() {
        if r_j == 0.0 {
            continue;
        }
        let row = layer.row(j);
        let denom: f64 = row.iter().zip(&x).map(|(&w, &xi)| xi * w.max(0.0)).sum();
        lost += dropped(r_j, denom);
        if denom == 0.0 {
            continue;
        }
        let scale = r_j / denom.max(STABILIZER);
        for ((r, &w), &xi) in r_in.iter_mut().zip(row).zip(&x) {
            *r += xi * w.max(0.0) * scale;
        }
    }
    Ok((r_in, lost))
}

/// zᴮ rule over the box `[lower, upper]ⁿ`:
/// `z_ji = x_i·w_ji − lower·w⁺_ji − upper·w⁻_ji`,
/// `R_i = Σ_j z_ji / max(Σ_i' z_ji', ε) · R_j`.
pub fn zb_backprop(
    layer: &DenseLayer<f64>,
    input: &[f64],
    lower: f64,
    upper: f64,
    output_relevance: &[f64],
) -> Result<Vec<f64>> {
    zb_tracked(layer, input, lower, upper, output_relevance).map(|(r, _)| r)
}

fn zb_tracked(
    layer: &DenseLayer<f64>,
    input: &[f64],
    lower: f64,
    upper: f64,
    output_relevance: &[f64],
) -> Result<(Vec<f64>, f64)> {
    check_lengths(layer, input, output_relevance)?;
    if let Some(bad) = input
        .iter()
        .find(|&&x| !(x >= lower - BOUND_TOLERANCE && x <= upper + BOUND_TOLERANCE))
    {
        return Err(Error::InvalidInput(format!(
            "zB rule input {bad} outside [{lower}, {upper}]"
        )));
    }
    let mut r_in = vec![0.0; layer.fan_in()];
    let mut z = vec![0.0; layer.fan_in()];
    let mut lost = 0.0;
    for (j, &r_j) in output_relevance.iter().enumerate() {
        if r_j == 0.0 {
            continue;
        }
        for ((zi, &w), &xi) in z.iter_mut().zip(layer.row(j)).zip(input) {
            *zi = xi * w - lower * w.max(0.0) - upper * w.min(0.0);
        }
        let denom: f64 = z.iter().sum();
        lost += dropped(r_j, denom);
        if denom == 0.0 {
            continue;
        }
        let scale = r_j / denom.max(STABILIZER);
        for (r, &zi) in r_in.iter_mut().zip(&z) {
            *r += zi * scale;
        }
    }
    Ok((r_in, lost))
}

fn check_lengths(layer: &DenseLayer<f64>, input: &[f64], output_relevance: &[f64]) -> Result<()> {
    if input.len() != layer.fan_in() {
        return Err(Error::shape("relevance input", layer.fan_in(), input.len()));
    }
    if output_relevance.len() != layer.fan_out() {
        return Err(Error::shape(
            "output relevance",
            layer.fan_out(),
            output_relevance.len(),
        ));
    }
    if !output_relevance.iter().all(|r| r.is_finite()) {
        return Err(Error::NonFinite("output relevance".into()));
    }
    Ok(())
}

/// Precomputed `f64` view of a network for repeated relevance queries.
#[derive(Debug, Clone)]
pub struct Explainer {
    n_adj: usize,
    folded: DenseLayer<f64>,
    output: DenseLayer<f64>,
}

/// Forward pass over raw probabilities in `f64`.
#[derive(Debug, Clone)]
pub struct RawForward {
    pub input: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
}

impl Explainer {
    pub fn new(net: &FusionNetwork) -> Self {
        Self {
            n_adj: net.dims().n_adj,
            folded: fold_whitening(net),
            output: net.output().cast(),
        }
    }

    pub fn folded_hidden(&self) -> &DenseLayer<f64> {
        &self.folded
    }

    pub fn forward(&self, net: &FusionNetwork, adj_probs: &[f32], noun_probs: &[f32]) -> Result<RawForward> {
        let input: Vec<f64> = net
            .validate_inputs(adj_probs, noun_probs)?
            .into_iter()
            .map(f64::from)
            .collect();
        let hidden = relu(&self.folded.forward(&input)?);
        let logits = self.output.forward(&hidden)?;
        Ok(RawForward { input, hidden, logits })
    }

    fn check_target(&self, target: usize) -> Result<()> {
        if target >= self.output.fan_out() {
            return Err(Error::OutOfRange {
                what: "target ANP",
                index: target,
                len: self.output.fan_out(),
            });
        }
        Ok(())
    }

    /// Relevance report for `target` given a recorded forward pass.
    pub fn explain_forward(&self, fwd: &RawForward, target: usize) -> Result<RelevanceReport> {
        self.check_target(target)?;
        let root = fwd.logits[target].max(0.0);
        let n_adj = self.n_adj;
        let n_in = fwd.input.len();
        let empty = |degenerate| RelevanceReport {
            target_anp: target,
            root_relevance: root,
            adj_contrib: vec![0.0; n_adj],
            noun_contrib: vec![0.0; n_in - n_adj],
            degenerate,
        };
        if root == 0.0 {
            return Ok(empty(true));
        }
        let mut r_out = vec![0.0; self.output.fan_out()];
        r_out[target] = root;
        let (r_hidden, lost_hidden) = zplus_tracked(&self.output, &fwd.hidden, &r_out)?;
        if r_hidden.iter().all(|&r| r == 0.0) {
            return Ok(empty(true));
        }
        let (mut r_in, lost_input) = zb_tracked(&self.folded, &fwd.input, 0.0, 1.0, &r_hidden)?;
        let noun_contrib = r_in.split_off(n_adj);
        Ok(RelevanceReport {
            target_anp: target,
            root_relevance: root,
            adj_contrib: r_in,
            noun_contrib,
            degenerate: lost_hidden > 0.0 || lost_input > 0.0,
        })
    }

    pub fn explain(
        &self,
        net: &FusionNetwork,
        adj_probs: &[f32],
        noun_probs: &[f32],
        target: usize,
    ) -> Result<RelevanceReport> {
        self.check_target(target)?;
        let fwd = self.forward(net, adj_probs, noun_probs)?;
        self.explain_forward(&fwd, target)
    }
}

/// Clamped pre-softmax score of `target`.
pub fn root_relevance(net: &FusionNetwork, adj_probs: &[f32], noun_probs: &[f32], target: usize) -> Result<f64> {
    let ex = Explainer::new(net);
    ex.check_target(target)?;
    Ok(ex.forward(net, adj_probs, noun_probs)?.logits[target].max(0.0))
}

/// Adjective and noun contributions to the score of `target`.
pub fn explain(net: &FusionNetwork, adj_probs: &[f32], noun_probs: &[f32], target: usize) -> Result<RelevanceReport> {
    Explainer::new(net).explain(net, adj_probs, noun_probs, target)
}

pub fn explain_sample(net: &FusionNetwork, sample: &Sample, target: usize) -> Result<RelevanceReport> {
    explain(net, &sample.adj_probs, &sample.noun_probs, target)
}
