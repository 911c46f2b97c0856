//! Adjective-to-Noun Ratio, orientation labels, visually equivalent ANPs and
//! related concepts, all computed from relevance reports.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dataio::{Sample, Vocabulary};
use crate::fusion::FusionNetwork;
use crate::metrics::{top_k_indices, topk_hit};
use crate::relevance::{Explainer, RelevanceReport};
use crate::{Error, Result};

/// Which (image, ANP) events feed an ANR estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnrMode {
    /// Ground-truth ANP in the top-k predictions.
    AnpCorrect,
    /// ... and the ground-truth adjective in the specialist's top-k.
    AnpAdjCorrect,
    /// ... and the ground-truth noun in the specialist's top-k.
    AnpNounCorrect,
    /// ... and both.
    AnpAdjNounCorrect,
    /// Every top-k predicted ANP of every image, ground truth ignored.
    AllTop5,
}

impl AnrMode {
    pub const ALL: [AnrMode; 5] = [
        AnrMode::AnpCorrect,
        AnrMode::AnpAdjCorrect,
        AnrMode::AnpNounCorrect,
        AnrMode::AnpAdjNounCorrect,
        AnrMode::AllTop5,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnrMode::AnpCorrect => "anp-correct",
            AnrMode::AnpAdjCorrect => "anp-adj",
            AnrMode::AnpNounCorrect => "anp-noun",
            AnrMode::AnpAdjNounCorrect => "anp-adj-noun",
            AnrMode::AllTop5 => "all-top5",
        }
    }

    fn needs_adj(self) -> bool {
        matches!(self, AnrMode::AnpAdjCorrect | AnrMode::AnpAdjNounCorrect)
    }

    fn needs_noun(self) -> bool {
        matches!(self, AnrMode::AnpNounCorrect | AnrMode::AnpAdjNounCorrect)
    }
}

impl fmt::Display for AnrMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnrMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AnrMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown ANR mode '{s}'")))
    }
}

/// Why a report does not yield an ANR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnrExclusion {
    Degenerate,
    ZeroNounContribution,
}

/// `(Σ adj / n_adj) / (Σ noun / n_noun)`.
pub fn anr_of_report(report: &RelevanceReport, n_adj: usize, n_noun: usize) -> std::result::Result<f64, AnrExclusion> {
    if report.degenerate {
        return Err(AnrExclusion::Degenerate);
    }
    let noun = report.noun_total() / n_noun as f64;
    if noun <= 0.0 {
        return Err(AnrExclusion::ZeroNounContribution);
    }
    Ok((report.adj_total() / n_adj as f64) / noun)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnrRecord {
    pub anp: usize,
    pub mode: AnrMode,
    /// Mean of the per-event ratios.
    pub anr: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnrTable {
    pub mode: AnrMode,
    /// ANPs with at least one usable event, in index order.
    pub records: Vec<AnrRecord>,
    /// Qualifying events dropped because their report gave no ANR.
    pub excluded: usize,
}

/// Shared per-sample pass: top-k predictions plus a forward record.
fn qualifying_targets(net: &FusionNetwork, sample: &Sample, mode: AnrMode, k: usize) -> Result<Vec<usize>> {
    let probs = net.predict_sample(sample)?;
    let top = top_k_indices(&probs, k);
    if mode == AnrMode::AllTop5 {
        return Ok(top);
    }
    let truth = sample.anp();
    let ok = top.contains(&truth)
        && (!mode.needs_adj() || topk_hit(&sample.adj_probs, sample.adj_label as usize, k)?)
        && (!mode.needs_noun() || topk_hit(&sample.noun_probs, sample.noun_label as usize, k)?);
    Ok(if ok { vec![truth] } else { Vec::new() })
}

/// Per-ANP mean ANR over the events selected by `mode`.
pub fn anr_table(net: &FusionNetwork, samples: &[Sample], mode: AnrMode, k: usize) -> Result<AnrTable> {
    check_k(k)?;
    let dims = net.dims();
    let explainer = Explainer::new(net);
    let per_sample: Vec<Vec<(usize, std::result::Result<f64, AnrExclusion>)>> = samples
        .par_iter()
        .map(|s| {
            let targets = qualifying_targets(net, s, mode, k)?;
            if targets.is_empty() {
                return Ok(Vec::new());
            }
            let fwd = explainer.forward(net, &s.adj_probs, &s.noun_probs)?;
            targets
                .into_iter()
                .map(|t| {
                    let report = explainer.explain_forward(&fwd, t)?;
                    Ok((t, anr_of_report(&report, dims.n_adj, dims.n_noun)))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut sums = vec![0f64; dims.n_anp];
    let mut counts = vec![0usize; dims.n_anp];
    let mut excluded = 0;
    for (anp, anr) in per_sample.into_iter().flatten() {
        match anr {
            Ok(v) => {
                sums[anp] += v;
                counts[anp] += 1;
            }
            Err(_) => excluded += 1,
        }
    }
    let records = (0..dims.n_anp)
        .filter(|&a| counts[a] > 0)
        .map(|anp| AnrRecord {
            anp,
            mode,
            anr: sums[anp] / counts[anp] as f64,
            n_samples: counts[anp],
        })
        .collect();
    Ok(AnrTable {
        mode,
        records,
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    AdjectiveOriented,
    NounOriented,
    /// ANR within 1e-9 of one.
    Boundary,
}

impl Orientation {
    pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

    pub fn of_anr(anr: f64) -> Self {
        if (anr - 1.0).abs() <= Self::BOUNDARY_TOLERANCE {
            Orientation::Boundary
        } else if anr > 1.0 {
            Orientation::AdjectiveOriented
        } else {
            Orientation::NounOriented
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::AdjectiveOriented => "adjective",
            Orientation::NounOriented => "noun",
            Orientation::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrientationLabel {
    pub anp: usize,
    pub anr: f64,
    pub orientation: Orientation,
}

pub fn classify_orientation(records: &[AnrRecord]) -> Vec<OrientationLabel> {
    records
        .iter()
        .filter(|r| r.n_samples > 0)
        .map(|r| OrientationLabel {
            anp: r.anp,
            anr: r.anr,
            orientation: Orientation::of_anr(r.anr),
        })
        .collect()
}

/// Mean contribution vectors of one ANP.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionProfile {
    pub anp: usize,
    pub adj_mean: Vec<f64>,
    pub noun_mean: Vec<f64>,
    pub n_events: usize,
}

impl ContributionProfile {
    /// Averages the reports' contribution vectors. `None` when empty.
    pub fn from_reports<'a, I>(anp: usize, reports: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a RelevanceReport>,
    {
        let mut acc: Option<Self> = None;
        for r in reports {
            let p = acc.get_or_insert_with(|| Self {
                anp,
                adj_mean: vec![0.0; r.adj_contrib.len()],
                noun_mean: vec![0.0; r.noun_contrib.len()],
                n_events: 0,
            });
            add_into(&mut p.adj_mean, &r.adj_contrib);
            add_into(&mut p.noun_mean, &r.noun_contrib);
            p.n_events += 1;
        }
        acc.map(|mut p| {
            p.finish();
            p
        })
    }

    fn finish(&mut self) {
        let n = self.n_events as f64;
        self.adj_mean.iter_mut().for_each(|v| *v /= n);
        self.noun_mean.iter_mut().for_each(|v| *v /= n);
    }

    pub fn top_adjectives(&self, k: usize) -> Vec<usize> {
        top_k_indices(&self.adj_mean, k)
    }

    pub fn top_nouns(&self, k: usize) -> Vec<usize> {
        top_k_indices(&self.noun_mean, k)
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}

/// Profiles of every ANP that has at least one qualifying event (ground truth
/// among the top-k predictions, explained at the ground truth).
pub fn contribution_profiles(net: &FusionNetwork, samples: &[Sample], k: usize) -> Result<Vec<ContributionProfile>> {
    check_k(k)?;
    let explainer = Explainer::new(net);
    let reports: Vec<Option<RelevanceReport>> = samples
        .par_iter()
        .map(|s| {
            if qualifying_targets(net, s, AnrMode::AnpCorrect, k)?.is_empty() {
                return Ok(None);
            }
            explainer.explain(net, &s.adj_probs, &s.noun_probs, s.anp()).map(Some)
        })
        .collect::<Result<_>>()?;

    let n_anp = net.dims().n_anp;
    let mut by_anp: Vec<Vec<&RelevanceReport>> = vec![Vec::new(); n_anp];
    for r in reports.iter().flatten() {
        by_anp[r.target_anp].push(r);
    }
    Ok(by_anp
        .into_iter()
        .enumerate()
        .filter_map(|(anp, rs)| ContributionProfile::from_reports(anp, rs))
        .collect())
}

/// Profile of one ANP; `None` when it has no qualifying event.
pub fn aggregate_contributions(
    net: &FusionNetwork,
    samples: &[Sample],
    anp: usize,
    k: usize,
) -> Result<Option<ContributionProfile>> {
    if anp >= net.dims().n_anp {
        return Err(Error::OutOfRange {
            what: "ANP",
            index: anp,
            len: net.dims().n_anp,
        });
    }
    let own: Vec<Sample> = samples.iter().filter(|s| s.anp() == anp).cloned().collect();
    Ok(contribution_profiles(net, &own, k)?.into_iter().next())
}

fn top_sets(p: &ContributionProfile, k: usize) -> (BTreeSet<usize>, BTreeSet<usize>) {
    (
        p.top_adjectives(k).into_iter().collect(),
        p.top_nouns(k).into_iter().collect(),
    )
}

/// Same top-k adjective set and same top-k noun set, order ignored.
pub fn are_visually_equivalent(a: &ContributionProfile, b: &ContributionProfile, k: usize) -> bool {
    top_sets(a, k) == top_sets(b, k)
}

/// All unordered pairs `(a, b)`, `a < b`, of equivalent profiles.
pub fn visually_equivalent(profiles: &[ContributionProfile], k: usize) -> Vec<(usize, usize)> {
    let sets: Vec<_> = profiles.iter().map(|p| (p.anp, top_sets(p, k))).collect();
    let mut pairs = Vec::new();
    for (i, (a, sa)) in sets.iter().enumerate() {
        for (b, sb) in &sets[i + 1..] {
            if sa == sb {
                pairs.push(((*a).min(*b), (*a).max(*b)));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelatedConcepts {
    pub anp: usize,
    pub adjectives: Vec<(String, f64)>,
    pub nouns: Vec<(String, f64)>,
}

/// The `k` most contributing adjectives and nouns, descending.
pub fn related_concepts(profile: &ContributionProfile, vocab: &Vocabulary, k: usize) -> Result<RelatedConcepts> {
    if profile.adj_mean.len() != vocab.n_adj() || profile.noun_mean.len() != vocab.n_noun() {
        return Err(Error::InvalidInput("profile does not match vocabulary".into()));
    }
    let named = |idx: Vec<usize>, names: &[String], scores: &[f64]| {
        idx.into_iter().map(|i| (names[i].clone(), scores[i])).collect()
    };
    Ok(RelatedConcepts {
        anp: profile.anp,
        adjectives: named(profile.top_adjectives(k), vocab.adjectives(), &profile.adj_mean),
        nouns: named(profile.top_nouns(k), vocab.nouns(), &profile.noun_mean),
    })
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    Ok(())
}
