use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::Sample;
use crate::{Error, Result};

/// Per-ANP stratified split. Each class of `n` samples puts
/// `max(⌊fraction·n⌋, 1)` samples in train and the rest in test, after a
/// seeded shuffle within the class. Output is grouped by class in ascending
/// label order.
pub fn stratified_split(samples: &[Sample], train_fraction: f64, seed: u64) -> Result<(Vec<Sample>, Vec<Sample>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        by_class.entry(s.anp_label).or_default().push(i);
    }
    if let Some((class, members)) = by_class.iter().find(|(_, m)| m.len() < 2) {
        return Err(Error::InvalidInput(format!(
            "ANP class {class} has {} sample(s); at least 2 are needed to split",
            members.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        let n_train = train_count(members.len(), train_fraction);
        train.extend(members[..n_train].iter().map(|&i| samples[i].clone()));
        test.extend(members[n_train..].iter().map(|&i| samples[i].clone()));
    }
    Ok((train, test))
}

pub(crate) fn train_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).floor() as usize).max(1)
}
