//! Synthetic specialist outputs with planted structure.
//!
//! A sample of ANP `(i, j)` gets
//! `adj_probs = softmax((adj_signal · onehot(i) + N(0, I)) / noise_temp)` and
//! the analogous noun vector. ANPs listed as the second member of a
//! duplicate pair reuse the generator (pair and signals) of the first member,
//! so their samples are distributionally identical while keeping their own
//! labels.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataio::vocab::default_names;
use crate::dataio::{Sample, Vocabulary};
use crate::{Error, Result};

/// One value for every ANP, or one value per ANP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Signal {
    Uniform(f64),
    PerAnp(Vec<f64>),
}

impl Signal {
    fn get(&self, anp: usize) -> f64 {
        match self {
            Signal::Uniform(v) => *v,
            Signal::PerAnp(v) => v[anp],
        }
    }

    fn validate(&self, name: &str, n_anp: usize) -> Result<()> {
        let values: &[f64] = match self {
            Signal::Uniform(v) => std::slice::from_ref(v),
            Signal::PerAnp(v) => {
                if v.len() != n_anp {
                    return Err(Error::InvalidInput(format!(
                        "{name} has {} entries for {n_anp} ANPs",
                        v.len()
                    )));
                }
                v
            }
        };
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "{name} value {bad} must be finite and >= 0"
            )));
        }
        Ok(())
    }
}

fn default_noise_temp() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_adj: usize,
    pub n_noun: usize,
    /// ANP list as `(adjective, noun)` pairs; the full grid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anps: Option<Vec<(u32, u32)>>,
    pub samples_per_anp: usize,
    pub adj_signal: Signal,
    pub noun_signal: Signal,
    #[serde(default = "default_noise_temp")]
    pub noise_temp: f64,
    /// `(source, copy)`: `copy` is generated exactly like `source`.
    #[serde(default)]
    pub duplicate_pairs: Vec<(usize, usize)>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjective_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noun_names: Option<Vec<String>>,
}

impl SynthConfig {
    /// Full grid, shared signals, no duplicates.
    pub fn grid(n_adj: usize, n_noun: usize, samples_per_anp: usize, signal: f64, seed: u64) -> Self {
        Self {
            n_adj,
            n_noun,
            anps: None,
            samples_per_anp,
            adj_signal: Signal::Uniform(signal),
            noun_signal: Signal::Uniform(signal),
            noise_temp: 1.0,
            duplicate_pairs: Vec::new(),
            seed,
            adjective_names: None,
            noun_names: None,
        }
    }

    pub fn vocabulary(&self) -> Result<Vocabulary> {
        let names = |given: &Option<Vec<String>>, prefix, n| match given {
            Some(v) if v.len() != n => Err(Error::InvalidInput(format!(
                "{prefix} names: {} given for {n} classes",
                v.len()
            ))),
            Some(v) => Ok(v.clone()),
            None => Ok(default_names(prefix, n)),
        };
        let adjectives = names(&self.adjective_names, "adj", self.n_adj)?;
        let nouns = names(&self.noun_names, "noun", self.n_noun)?;
        match &self.anps {
            Some(anps) => Vocabulary::new(adjectives, nouns, anps.clone()),
            None => {
                let grid = Vocabulary::grid(self.n_adj, self.n_noun)?;
                Vocabulary::new(adjectives, nouns, grid.anps().to_vec())
            }
        }
    }

    fn validate(&self, n_anp: usize) -> Result<()> {
        if self.n_adj == 0 || self.n_noun == 0 {
            return Err(Error::InvalidInput("n_adj and n_noun must be positive".into()));
        }
        if self.samples_per_anp == 0 {
            return Err(Error::InvalidInput("samples_per_anp must be at least 1".into()));
        }
        if !(self.noise_temp.is_finite() && self.noise_temp > 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise_temp {} must be > 0",
                self.noise_temp
            )));
        }
        self.adj_signal.validate("adj_signal", n_anp)?;
        self.noun_signal.validate("noun_signal", n_anp)?;
        let mut copies = vec![false; n_anp];
        for &(src, copy) in &self.duplicate_pairs {
            if src >= n_anp || copy >= n_anp || src == copy {
                return Err(Error::InvalidInput(format!("bad duplicate pair ({src}, {copy})")));
            }
            if std::mem::replace(&mut copies[copy], true) {
                return Err(Error::InvalidInput(format!("ANP {copy} is duplicated twice")));
            }
        }
        if self.duplicate_pairs.iter().any(|&(src, _)| copies[src]) {
            return Err(Error::InvalidInput("duplicate pairs must not chain".into()));
        }
        Ok(())
    }
}

/// Generates the vocabulary and `samples_per_anp` samples per ANP, in ANP order.
pub fn synth_generate(config: &SynthConfig) -> Result<(Vocabulary, Vec<Sample>)> {
    let vocab = config.vocabulary()?;
    config.validate(vocab.n_anp())?;

    let mut generator: Vec<usize> = (0..vocab.n_anp()).collect();
    for &(src, copy) in &config.duplicate_pairs {
        generator[copy] = src;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut samples = Vec::with_capacity(vocab.n_anp() * config.samples_per_anp);
    for (k, &g) in generator.iter().enumerate() {
        let (gi, gj) = vocab.anp(g);
        let (a, n) = vocab.anp(k);
        for _ in 0..config.samples_per_anp {
            let adj_probs = noisy_onehot(&mut rng, vocab.n_adj(), gi, config.adj_signal.get(g), config.noise_temp);
            let noun_probs = noisy_onehot(
                &mut rng,
                vocab.n_noun(),
                gj,
                config.noun_signal.get(g),
                config.noise_temp,
            );
            samples.push(Sample {
                adj_probs,
                noun_probs,
                adj_label: a as u32,
                noun_label: n as u32,
                anp_label: k as u32,
            });
        }
    }
    Ok((vocab, samples))
}

fn noisy_onehot<R: Rng>(rng: &mut R, n: usize, hot: usize, signal: f64, temp: f64) -> Vec<f32> {
    let logits: Vec<f64> = (0..n)
        .map(|c| {
            let noise: f64 = rng.sample(StandardNormal);
            let boost = if c == hot { signal } else { 0.0 };
            (boost + noise) / temp
        })
        .collect();
    crate::nn::softmax(&logits).into_iter().map(|p| p as f32).collect()
}
