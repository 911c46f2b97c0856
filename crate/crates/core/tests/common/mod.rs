#![allow(dead_code)]

use anpnet_core::dataio::{Sample, Vocabulary};
use anpnet_core::fusion::{FusionDims, FusionNetwork, Whitener};
use anpnet_core::nn::{softmax, DenseLayer};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn uniform_vec<R: Rng>(rng: &mut R, n: usize, lo: f32, hi: f32) -> Vec<f32> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// A probability vector from softmax of scaled Gaussian logits.
pub fn random_probs<R: Rng>(rng: &mut R, n: usize) -> Vec<f32> {
    let scale = rng.random_range(0.5..3.0);
    let logits: Vec<f64> = (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    softmax(&logits).into_iter().map(|p| p as f32).collect()
}

pub fn random_dims<R: Rng>(rng: &mut R, max: FusionDims) -> FusionDims {
    FusionDims::new(
        rng.random_range(1..=max.n_adj),
        rng.random_range(1..=max.n_noun),
        rng.random_range(1..=max.hidden),
        rng.random_range(2..=max.n_anp),
    )
}

/// Random weights, signed biases and a random whitener.
pub fn random_network<R: Rng>(rng: &mut R, dims: FusionDims) -> FusionNetwork {
    let n_in = dims.input_dim();
    let whitener = Whitener::new(uniform_vec(rng, n_in, 0.0, 1.0), uniform_vec(rng, n_in, 0.1, 1.0)).unwrap();
    let hidden = DenseLayer::new(
        n_in,
        dims.hidden,
        uniform_vec(rng, n_in * dims.hidden, -1.0, 1.0),
        uniform_vec(rng, dims.hidden, -0.5, 0.5),
    )
    .unwrap();
    let output = DenseLayer::new(
        dims.hidden,
        dims.n_anp,
        uniform_vec(rng, dims.hidden * dims.n_anp, -1.0, 1.0),
        uniform_vec(rng, dims.n_anp, -0.5, 0.5),
    )
    .unwrap();
    FusionNetwork::from_parts(dims, whitener, hidden, output).unwrap()
}

/// Two adjectives, two nouns, four ANPs `(i, j)` in row-major order. Hidden
/// unit `(i, j)` computes `relu(adj_i + noun_j − 1)` and feeds only ANP `(i, j)`.
pub fn routing_network() -> (Vocabulary, FusionNetwork) {
    let vocab = Vocabulary::grid(2, 2).unwrap();
    let mut rows = Vec::new();
    for k in 0..4 {
        let (i, j) = vocab.anp(k);
        let mut row = vec![0.0f32; 4];
        row[i] = 1.0;
        row[2 + j] = 1.0;
        rows.push(row);
    }
    let hidden = DenseLayer::from_rows(&rows, vec![-1.0; 4]).unwrap();
    let output = DenseLayer::from_rows(
        &(0..4)
            .map(|k| (0..4).map(|u| if u == k { 1.0 } else { 0.0 }).collect())
            .collect::<Vec<_>>(),
        vec![0.0; 4],
    )
    .unwrap();
    let net = FusionNetwork::from_parts(FusionDims::new(2, 2, 4, 4), Whitener::identity(4), hidden, output).unwrap();
    (vocab, net)
}

/// A sample of ANP `k` whose specialists favour its adjective and noun.
pub fn routing_sample(vocab: &Vocabulary, k: usize, confidence: f32) -> Sample {
    let (i, j) = vocab.anp(k);
    let peaked = |hot: usize| -> Vec<f32> {
        (0..2)
            .map(|c| if c == hot { confidence } else { 1.0 - confidence })
            .collect()
    };
    Sample {
        adj_probs: peaked(i),
        noun_probs: peaked(j),
        adj_label: i as u32,
        noun_label: j as u32,
        anp_label: k as u32,
    }
}
