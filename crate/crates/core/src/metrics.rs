//! Top-k accuracy, per-class tables, co-detection matrix and histograms.
//!
//! Ranking always breaks score ties by class index, lower index first.

use std::cmp::Ordering;

use crate::dataio::Sample;
use crate::{Error, Result};

/// Class indices ordered by descending score, ties by ascending index.
pub fn ranked_indices<T: Copy + Into<f64>>(scores: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        let (sa, sb): (f64, f64) = (scores[a].into(), scores[b].into());
        sb.partial_cmp(&sa).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    idx
}

/// The `k` best classes (fewer if there are fewer classes).
pub fn top_k_indices<T: Copy + Into<f64>>(scores: &[T], k: usize) -> Vec<usize> {
    let mut idx = ranked_indices(scores);
    idx.truncate(k);
    idx
}

/// True iff `label` is among the `k` highest-scoring classes.
pub fn topk_hit<T: Copy + Into<f64>>(scores: &[T], label: usize, k: usize) -> Result<bool> {
    if label >= scores.len() {
        return Err(Error::OutOfRange {
            what: "class label",
            index: label,
            len: scores.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let target: f64 = scores[label].into();
    let ahead = scores
        .iter()
        .enumerate()
        .filter(|&(c, &s)| {
            let s: f64 = s.into();
            s > target || (s == target && c < label)
        })
        .count();
    Ok(ahead < k)
}

/// Hit and sample counts per class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassAccuracy {
    pub hits: Vec<usize>,
    pub counts: Vec<usize>,
}

impl ClassAccuracy {
    pub fn new(n_classes: usize) -> Self {
        Self {
            hits: vec![0; n_classes],
            counts: vec![0; n_classes],
        }
    }

    pub fn record(&mut self, class: usize, hit: bool) {
        self.counts[class] += 1;
        self.hits[class] += hit as usize;
    }

    /// Percent accuracy, or `None` for a class without samples.
    pub fn accuracy(&self, class: usize) -> Option<f64> {
        (self.counts[class] > 0).then(|| 100.0 * self.hits[class] as f64 / self.counts[class] as f64)
    }

    /// Accuracies of the classes that have samples.
    pub fn present(&self) -> Vec<(usize, f64)> {
        (0..self.counts.len())
            .filter_map(|c| self.accuracy(c).map(|a| (c, a)))
            .collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn overall(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| 100.0 * self.hits.iter().sum::<usize>() as f64 / n as f64)
    }
}

/// Per-class top-k accuracy over a dataset.
pub fn per_class_topk<S, T>(scores: &[S], labels: &[usize], n_classes: usize, k: usize) -> Result<ClassAccuracy>
where
    S: AsRef<[T]>,
    T: Copy + Into<f64>,
{
    if scores.len() != labels.len() {
        return Err(Error::shape("labels", scores.len(), labels.len()));
    }
    let mut table = ClassAccuracy::new(n_classes);
    for (s, &y) in scores.iter().zip(labels) {
        let s = s.as_ref();
        if s.len() != n_classes {
            return Err(Error::shape("score vector", n_classes, s.len()));
        }
        table.record(y, topk_hit(s, y, k)?);
    }
    Ok(table)
}

/// Top-k accuracy tables for adjectives, nouns and ANPs over a dataset.
/// Adjective and noun hits are judged on the specialist inputs, ANP hits on
/// `anp_scores`.
pub fn concept_accuracies<P: AsRef<[f64]>>(
    samples: &[Sample],
    anp_scores: &[P],
    n_anp: usize,
    k: usize,
) -> Result<[ClassAccuracy; 3]> {
    if samples.len() != anp_scores.len() {
        return Err(Error::shape("ANP score rows", samples.len(), anp_scores.len()));
    }
    let (n_adj, n_noun) = samples
        .first()
        .map_or((0, 0), |s| (s.adj_probs.len(), s.noun_probs.len()));
    let mut tables = [
        ClassAccuracy::new(n_adj),
        ClassAccuracy::new(n_noun),
        ClassAccuracy::new(n_anp),
    ];
    for (s, p) in samples.iter().zip(anp_scores) {
        let p = p.as_ref();
        if p.len() != n_anp {
            return Err(Error::shape("ANP scores", n_anp, p.len()));
        }
        if s.adj_probs.len() != n_adj || s.noun_probs.len() != n_noun {
            return Err(Error::InvalidInput("samples disagree on vector lengths".into()));
        }
        tables[0].record(s.adj_label as usize, topk_hit(&s.adj_probs, s.adj_label as usize, k)?);
        tables[1].record(
            s.noun_label as usize,
            topk_hit(&s.noun_probs, s.noun_label as usize, k)?,
        );
        tables[2].record(s.anp(), topk_hit(p, s.anp(), k)?);
    }
    Ok(tables)
}

/// Co-detection matrix of fusion predictions against the specialist inputs.
pub fn codetection_for_samples<P: AsRef<[f64]>>(
    samples: &[Sample],
    anp_scores: &[P],
    k: usize,
) -> Result<CoDetectionMatrix> {
    let adj: Vec<&[f32]> = samples.iter().map(|s| s.adj_probs.as_slice()).collect();
    let noun: Vec<&[f32]> = samples.iter().map(|s| s.noun_probs.as_slice()).collect();
    let labels: Vec<ConceptLabels> = samples
        .iter()
        .map(|s| (s.adj_label as usize, s.noun_label as usize, s.anp()))
        .collect();
    codetection(&adj, &noun, anp_scores, &labels, k)
}

/// Row/column order of the co-detection matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concept {
    Adjective = 0,
    Noun = 1,
    Anp = 2,
}

impl Concept {
    pub const ALL: [Concept; 3] = [Concept::Adjective, Concept::Noun, Concept::Anp];

    pub fn name(self) -> &'static str {
        match self {
            Concept::Adjective => "Adj",
            Concept::Noun => "Noun",
            Concept::Anp => "ANP",
        }
    }
}

/// Entry `(r, c)`: percentage of samples with concept `c` correct among those
/// with concept `r` correct.
#[derive(Debug, Clone, PartialEq)]
pub struct CoDetectionMatrix {
    pub entries: [[Option<f64>; 3]; 3],
    pub row_counts: [usize; 3],
}

impl CoDetectionMatrix {
    /// `hits[i] = [adj_correct, noun_correct, anp_correct]` for sample `i`.
    pub fn from_hits(hits: &[[bool; 3]]) -> Self {
        let mut row_counts = [0usize; 3];
        let mut joint = [[0usize; 3]; 3];
        for h in hits {
            for r in 0..3 {
                if !h[r] {
                    continue;
                }
                row_counts[r] += 1;
                for c in 0..3 {
                    joint[r][c] += h[c] as usize;
                }
            }
        }
        let mut entries = [[None; 3]; 3];
        for r in 0..3 {
            if row_counts[r] == 0 {
                continue;
            }
            for c in 0..3 {
                entries[r][c] = Some(if r == c {
                    100.0
                } else {
                    100.0 * joint[r][c] as f64 / row_counts[r] as f64
                });
            }
        }
        Self { entries, row_counts }
    }

    pub fn get(&self, row: Concept, col: Concept) -> Option<f64> {
        self.entries[row as usize][col as usize]
    }
}

/// Labels of one sample as `(adjective, noun, anp)`.
pub type ConceptLabels = (usize, usize, usize);

/// Co-detection matrix at top-k. Adjective and noun correctness come from the
/// specialist score vectors, ANP correctness from the fusion scores.
pub fn codetection<A, N, P, T, U, V>(
    adj_scores: &[A],
    noun_scores: &[N],
    anp_scores: &[P],
    labels: &[ConceptLabels],
    k: usize,
) -> Result<CoDetectionMatrix>
where
    A: AsRef<[T]>,
    N: AsRef<[U]>,
    P: AsRef<[V]>,
    T: Copy + Into<f64>,
    U: Copy + Into<f64>,
    V: Copy + Into<f64>,
{
    let n = labels.len();
    for (what, len) in [
        ("adjective scores", adj_scores.len()),
        ("noun scores", noun_scores.len()),
        ("ANP scores", anp_scores.len()),
    ] {
        if len != n {
            return Err(Error::InvalidInput(format!("{what}: {len} rows for {n} labels")));
        }
    }
    let hits = labels
        .iter()
        .enumerate()
        .map(|(i, &(a, nn, p))| {
            Ok([
                topk_hit(adj_scores[i].as_ref(), a, k)?,
                topk_hit(noun_scores[i].as_ref(), nn, k)?,
                topk_hit(anp_scores[i].as_ref(), p, k)?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoDetectionMatrix::from_hits(&hits))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Bins percent accuracies into `[lo, lo + width)` bins covering `[0, 100]`;
/// the last bin is closed.
pub fn accuracy_histogram(accuracies: &[f64], bin_width: f64) -> Result<Vec<HistogramBin>> {
    if !(bin_width > 0.0 && bin_width <= 100.0) {
        return Err(Error::InvalidInput(format!("bin width {bin_width} not in (0, 100]")));
    }
    let n_bins = (100.0 / bin_width).ceil() as usize;
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|b| HistogramBin {
            lower: b as f64 * bin_width,
            upper: ((b + 1) as f64 * bin_width).min(100.0),
            count: 0,
        })
        .collect();
    for &a in accuracies {
        if !(0.0..=100.0).contains(&a) {
            return Err(Error::InvalidInput(format!("accuracy {a} outside [0, 100]")));
        }
        let b = ((a / bin_width).floor() as usize).min(n_bins - 1);
        bins[b].count += 1;
    }
    Ok(bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn topk_examples() {
        assert!(topk_hit(&[0.1, 0.7, 0.2], 1, 1).unwrap());
        let scores: Vec<f64> = (0..10).map(|c| 10.0 - c as f64).collect();
        assert!(!topk_hit(&scores, 5, 5).unwrap());
        assert!(topk_hit(&scores, 4, 5).unwrap());
        let flat = [1.0f64; 10];
        assert!(!topk_hit(&flat, 7, 5).unwrap());
        assert!(topk_hit(&flat, 4, 5).unwrap());
        assert!(topk_hit(&flat, 0, 3).is_ok());
        assert!(topk_hit(&flat, 10, 3).is_err());
    }

    #[test]
    fn ranking_tie_break() {
        assert_eq!(ranked_indices(&[1.0f64, 3.0, 1.0, 3.0]), vec![1, 3, 0, 2]);
        assert_eq!(top_k_indices(&[1.0f64, 2.0], 5), vec![1, 0]);
    }

    #[test]
    fn per_class_examples() {
        let scores = vec![vec![0.9f64, 0.1], vec![0.2, 0.8], vec![0.6, 0.4]];
        let t = per_class_topk(&scores, &[0, 1, 1], 2, 1).unwrap();
        assert_eq!(t.accuracy(0), Some(100.0));
        assert_eq!(t.accuracy(1), Some(50.0));
        let t = per_class_topk(&scores[..1], &[0], 3, 1);
        assert!(t.is_err());
        let t = per_class_topk(&scores[..1], &[0], 2, 1).unwrap();
        assert_eq!(t.accuracy(1), None);
        assert_eq!(t.present(), vec![(0, 100.0)]);
    }

    #[test]
    fn codetection_single_sample() {
        let m = CoDetectionMatrix::from_hits(&[[true, true, true]]);
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(m.entries[r][c], Some(100.0));
            }
        }
    }

    #[test]
    fn codetection_two_sample_enumeration() {
        let m = CoDetectionMatrix::from_hits(&[[true, true, true], [true, false, false]]);
        assert_eq!(m.entries[0], [Some(100.0), Some(50.0), Some(50.0)]);
        assert_eq!(m.entries[1], [Some(100.0); 3]);
        assert_eq!(m.entries[2], [Some(100.0); 3]);
        assert_eq!(m.row_counts, [2, 1, 1]);
    }

    #[test]
    fn codetection_empty_row_absent() {
        let m = CoDetectionMatrix::from_hits(&[[true, false, false]]);
        assert_eq!(m.entries[1], [None; 3]);
        assert_eq!(m.get(Concept::Adjective, Concept::Noun), Some(0.0));
    }

    #[test]
    fn codetection_from_scores() {
        let adj = vec![vec![0.9f32, 0.1], vec![0.8, 0.2]];
        let noun = vec![vec![0.1f32, 0.9], vec![0.9, 0.1]];
        let anp = vec![vec![0.0f64, 1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0]];
        let m = codetection(&adj, &noun, &anp, &[(0, 1, 1), (0, 1, 1)], 1).unwrap();
        assert_eq!(m.entries[0], [Some(100.0), Some(50.0), Some(50.0)]);
    }

    #[test]
    fn histogram_examples() {
        let bins = accuracy_histogram(&[0.0, 10.0, 10.0], 10.0).unwrap();
        assert_eq!(bins.len(), 10);
        assert_eq!(bins[0].count, 1);
        assert_eq!(bins[1].count, 2);
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 3);

        let bins = accuracy_histogram(&[100.0], 10.0).unwrap();
        assert_eq!(bins[9].count, 1);
        assert_eq!((bins[9].lower, bins[9].upper), (90.0, 100.0));

        assert!(accuracy_histogram(&[], 10.0).unwrap().iter().all(|b| b.count == 0));
        assert!(accuracy_histogram(&[101.0], 10.0).is_err());
        assert_eq!(accuracy_histogram(&[], 30.0).unwrap().last().unwrap().upper, 100.0);
    }

    proptest! {
        #[test]
        fn topk_monotone_in_k(scores in prop::collection::vec(-3i32..3, 1..12), label_seed in 0usize..100, k in 1usize..12) {
            let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
            let label = label_seed % scores.len();
            if topk_hit(&scores, label, k).unwrap() {
                prop_assert!(topk_hit(&scores, label, k + 1).unwrap());
            }
            // rank-based and sort-based definitions agree
            let pos = ranked_indices(&scores).iter().position(|&c| c == label).unwrap();
            prop_assert_eq!(pos < k, topk_hit(&scores, label, k).unwrap());
        }

        #[test]
        fn overall_is_weighted_mean_of_classes(
            rows in prop::collection::vec((prop::collection::vec(0.0f64..1.0, 4), 0usize..4), 1..40),
            k in 1usize..4,
        ) {
            let (scores, labels): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            let t = per_class_topk(&scores, &labels, 4, k).unwrap();
            let weighted: f64 = t.present().iter().map(|&(c, a)| a * t.counts[c] as f64).sum::<f64>()
                / t.total() as f64;
            prop_assert!((weighted - t.overall().unwrap()).abs() < 1e-9);
        }

        #[test]
        fn codetection_diagonal_is_100(hits in prop::collection::vec(prop::array::uniform3(any::<bool>()), 0..30)) {
            let m = CoDetectionMatrix::from_hits(&hits);
            for r in 0..3 {
                if m.row_counts[r] > 0 {
                    prop_assert_eq!(m.entries[r][r], Some(100.0));
                    for c in 0..3 {
                        let v = m.entries[r][c].unwrap();
                        prop_assert!((0.0..=100.0).contains(&v));
                    }
                }
            }
        }
    }
}
