//! CSV renderings of results. Every table has a header row and prints reals
//! with six decimals so repeated runs diff cleanly.

use crate::analysis::{AnrTable, OrientationLabel, RelatedConcepts};
use crate::dataio::Vocabulary;
use crate::fusion::TrainHistory;
use crate::metrics::{ClassAccuracy, CoDetectionMatrix, Concept, HistogramBin};
use crate::relevance::RelevanceReport;
use crate::{Error, Result};

fn real(v: f64) -> String {
    format!("{v:.6}")
}

fn opt_real(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

fn render<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::InvalidInput(format!("CSV output: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(fail)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("CSV output: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(format!("CSV output: {e}")))
}

pub fn history_csv(history: &TrainHistory) -> Result<String> {
    render(
        &["epoch", "train_loss", "train_top1", "val_loss", "val_top1", "val_top5"],
        history.epochs.iter().map(|e| {
            vec![
                e.epoch.to_string(),
                real(e.train_loss),
                real(e.train_top1),
                opt_real(e.val_loss),
                opt_real(e.val_top1),
                opt_real(e.val_top5),
            ]
        }),
    )
}

/// Overall accuracy per concept for each `(k, [adj, noun, anp])` entry.
pub fn accuracy_csv(results: &[(usize, [ClassAccuracy; 3])]) -> Result<String> {
    render(
        &["concept", "k", "accuracy", "n_samples"],
        results.iter().flat_map(|(k, tables)| {
            Concept::ALL.into_iter().map(move |c| {
                let t = &tables[c as usize];
                vec![
                    c.name().to_string(),
                    k.to_string(),
                    opt_real(t.overall()),
                    t.total().to_string(),
                ]
            })
        }),
    )
}

fn class_name(vocab: &Vocabulary, concept: Concept, class: usize) -> String {
    match concept {
        Concept::Adjective => vocab.adjectives()[class].clone(),
        Concept::Noun => vocab.nouns()[class].clone(),
        Concept::Anp => vocab.anp_name(class),
    }
}

/// Per-class accuracy; classes without samples are left out.
pub fn per_class_csv(vocab: &Vocabulary, results: &[(usize, [ClassAccuracy; 3])]) -> Result<String> {
    let mut rows = Vec::new();
    for (k, tables) in results {
        for c in Concept::ALL {
            let t = &tables[c as usize];
            for (class, acc) in t.present() {
                rows.push(vec![
                    c.name().to_string(),
                    class.to_string(),
                    class_name(vocab, c, class),
                    k.to_string(),
                    real(acc),
                    t.counts[class].to_string(),
                ]);
            }
        }
    }
    render(&["concept", "class", "name", "k", "accuracy", "n_samples"], rows)
}

pub fn histogram_csv(k: usize, histograms: &[(Concept, Vec<HistogramBin>)]) -> Result<String> {
    render(
        &["concept", "k", "lower", "upper", "count"],
        histograms.iter().flat_map(|(c, bins)| {
            bins.iter().map(move |b| {
                vec![
                    c.name().to_string(),
                    k.to_string(),
                    real(b.lower),
                    real(b.upper),
                    b.count.to_string(),
                ]
            })
        }),
    )
}

/// Rows are the conditioning concept; empty rows have blank cells.
pub fn codetection_csv(k: usize, m: &CoDetectionMatrix) -> Result<String> {
    render(
        &["k", "row", "n_samples", "Adj", "Noun", "ANP"],
        Concept::ALL.into_iter().map(|r| {
            let mut row = vec![
                k.to_string(),
                r.name().to_string(),
                m.row_counts[r as usize].to_string(),
            ];
            row.extend(Concept::ALL.into_iter().map(|c| opt_real(m.get(r, c))));
            row
        }),
    )
}

pub fn relevance_csv(vocab: &Vocabulary, report: &RelevanceReport) -> Result<String> {
    let adj = report
        .adj_contrib
        .iter()
        .zip(vocab.adjectives())
        .map(|(v, name)| vec!["adjective".to_string(), name.clone(), real(*v)]);
    let noun = report
        .noun_contrib
        .iter()
        .zip(vocab.nouns())
        .map(|(v, name)| vec!["noun".to_string(), name.clone(), real(*v)]);
    render(&["branch", "concept", "contribution"], adj.chain(noun))
}

pub fn anr_csv(vocab: &Vocabulary, table: &AnrTable) -> Result<String> {
    render(
        &["anp", "name", "mode", "anr", "n_events"],
        table.records.iter().map(|r| {
            vec![
                r.anp.to_string(),
                vocab.anp_name(r.anp),
                r.mode.to_string(),
                real(r.anr),
                r.n_samples.to_string(),
            ]
        }),
    )
}

pub fn orientation_csv(vocab: &Vocabulary, labels: &[OrientationLabel]) -> Result<String> {
    render(
        &["anp", "name", "anr", "orientation"],
        labels.iter().map(|l| {
            vec![
                l.anp.to_string(),
                vocab.anp_name(l.anp),
                real(l.anr),
                l.orientation.as_str().to_string(),
            ]
        }),
    )
}

pub fn equivalence_csv(vocab: &Vocabulary, pairs: &[(usize, usize)]) -> Result<String> {
    render(
        &["anp_a", "name_a", "anp_b", "name_b"],
        pairs
            .iter()
            .map(|&(a, b)| vec![a.to_string(), vocab.anp_name(a), b.to_string(), vocab.anp_name(b)]),
    )
}

pub fn related_csv(vocab: &Vocabulary, related: &[RelatedConcepts]) -> Result<String> {
    let mut rows = Vec::new();
    for r in related {
        for (branch, list) in [("adjective", &r.adjectives), ("noun", &r.nouns)] {
            for (rank, (name, v)) in list.iter().enumerate() {
                rows.push(vec![
                    r.anp.to_string(),
                    vocab.anp_name(r.anp),
                    branch.to_string(),
                    (rank + 1).to_string(),
                    name.clone(),
                    real(*v),
                ]);
            }
        }
    }
    render(&["anp", "name", "branch", "rank", "concept", "contribution"], rows)
}
