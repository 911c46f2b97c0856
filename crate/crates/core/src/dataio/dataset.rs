use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::binio::{LeReader, LeWriter};
use crate::dataio::Vocabulary;
use crate::{Error, Result};

pub const DATASET_MAGIC: [u8; 4] = *b"ANPD";
pub const DATASET_VERSION: u16 = 1;

/// Tolerance on the sum of a stored probability vector.
pub const SAMPLE_SUM_TOLERANCE: f64 = 1e-4;
/// CSV rows are renormalized when their sum is within this distance of 1.
pub const CSV_SUM_TOLERANCE: f64 = 1e-3;

/// One observation: the specialist outputs plus ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub adj_probs: Vec<f32>,
    pub noun_probs: Vec<f32>,
    pub adj_label: u32,
    pub noun_label: u32,
    pub anp_label: u32,
}

impl Sample {
    /// Concatenated `[adj_probs, noun_probs]`.
    pub fn input(&self) -> Vec<f32> {
        let mut x = Vec::with_capacity(self.adj_probs.len() + self.noun_probs.len());
        x.extend_from_slice(&self.adj_probs);
        x.extend_from_slice(&self.noun_probs);
        x
    }

    pub fn anp(&self) -> usize {
        self.anp_label as usize
    }

    /// Checks vector lengths, sums, and label consistency against `vocab`.
    pub fn validate(&self, vocab: &Vocabulary) -> Result<()> {
        if self.adj_probs.len() != vocab.n_adj() {
            return Err(Error::shape(
                "adjective probabilities",
                vocab.n_adj(),
                self.adj_probs.len(),
            ));
        }
        if self.noun_probs.len() != vocab.n_noun() {
            return Err(Error::shape(
                "noun probabilities",
                vocab.n_noun(),
                self.noun_probs.len(),
            ));
        }
        for (name, v) in [("adjective", &self.adj_probs), ("noun", &self.noun_probs)] {
            let sum: f64 = v.iter().map(|&p| p as f64).sum();
            if (sum - 1.0).abs() > SAMPLE_SUM_TOLERANCE {
                return Err(Error::InvalidInput(format!("{name} probabilities sum to {sum}")));
            }
        }
        if self.anp() >= vocab.n_anp() {
            return Err(Error::OutOfRange {
                what: "ANP label",
                index: self.anp(),
                len: vocab.n_anp(),
            });
        }
        let pair = vocab.anp(self.anp());
        if pair != (self.adj_label as usize, self.noun_label as usize) {
            return Err(Error::InvalidInput(format!(
                "labels ({}, {}) do not match ANP {} = {:?}",
                self.adj_label, self.noun_label, self.anp_label, pair
            )));
        }
        Ok(())
    }
}

/// A set of samples with their class-space dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_adj: usize,
    pub n_noun: usize,
    pub n_anp: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(vocab: &Vocabulary, samples: Vec<Sample>) -> Result<Self> {
        for s in &samples {
            s.validate(vocab)?;
        }
        Ok(Self {
            n_adj: vocab.n_adj(),
            n_noun: vocab.n_noun(),
            n_anp: vocab.n_anp(),
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Fails unless the header dimensions equal the vocabulary's.
    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        for (what, file, expected) in [
            ("n_adj", self.n_adj, vocab.n_adj()),
            ("n_noun", self.n_noun, vocab.n_noun()),
            ("n_anp", self.n_anp, vocab.n_anp()),
        ] {
            if file != expected {
                return Err(Error::DimensionMismatch { what, file, expected });
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<W> {
        let mut out = LeWriter::new(w);
        out.bytes(&DATASET_MAGIC)?;
        out.u16(DATASET_VERSION)?;
        out.u64(self.samples.len() as u64)?;
        out.u32(self.n_adj as u32)?;
        out.u32(self.n_noun as u32)?;
        out.u32(self.n_anp as u32)?;
        for s in &self.samples {
            if s.adj_probs.len() != self.n_adj || s.noun_probs.len() != self.n_noun {
                return Err(Error::InvalidInput(
                    "sample length disagrees with dataset header".into(),
                ));
            }
            out.u32(s.adj_label)?;
            out.u32(s.noun_label)?;
            out.u32(s.anp_label)?;
            out.f32s(&s.adj_probs)?;
            out.f32s(&s.noun_probs)?;
        }
        out.finish()
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut inp = LeReader::new(r);
        inp.magic(DATASET_MAGIC)?;
        inp.version(DATASET_VERSION)?;
        let n_samples = inp.u64("sample count")? as usize;
        let n_adj = inp.u32("n_adj")? as usize;
        let n_noun = inp.u32("n_noun")? as usize;
        let n_anp = inp.u32("n_anp")? as usize;
        // don't trust n_samples for the allocation
        let mut samples = Vec::with_capacity(n_samples.min(1 << 20));
        for _ in 0..n_samples {
            let adj_label = inp.u32("adjective label")?;
            let noun_label = inp.u32("noun label")?;
            let anp_label = inp.u32("ANP label")?;
            for (what, label, len) in [
                ("adjective label", adj_label, n_adj),
                ("noun label", noun_label, n_noun),
                ("ANP label", anp_label, n_anp),
            ] {
                if label as usize >= len {
                    return Err(Error::OutOfRange {
                        what,
                        index: label as usize,
                        len,
                    });
                }
            }
            samples.push(Sample {
                adj_label,
                noun_label,
                anp_label,
                adj_probs: inp.f32s(n_adj, "adjective probabilities")?,
                noun_probs: inp.f32s(n_noun, "noun probabilities")?,
            });
        }
        inp.expect_end()?;
        Ok(Self {
            n_adj,
            n_noun,
            n_anp,
            samples,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        self.write_to(BufWriter::new(file))?;
        Ok(())
    }

    /// Reads a dataset file; with a vocabulary, also checks dimensions and
    /// every sample's invariants.
    pub fn read(path: &Path, vocab: Option<&Vocabulary>) -> Result<Self> {
        let ds = Self::read_from(BufReader::new(File::open(path)?))?;
        if let Some(v) = vocab {
            ds.check_vocab(v)?;
            for s in &ds.samples {
                s.validate(v)?;
            }
        }
        Ok(ds)
    }
}

/// Imports samples from a CSV file with columns
/// `adj_label,noun_label,anp_label,<n_adj adjective probs>,<n_noun noun probs>`.
/// A header row is required.
pub fn import_csv(path: &Path, vocab: &Vocabulary) -> Result<Dataset> {
    let file = File::open(path)?;
    import_csv_from(file, &path.display().to_string(), vocab)
}

pub fn import_csv_from<R: Read>(reader: R, location: &str, vocab: &Vocabulary) -> Result<Dataset> {
    let width = 3 + vocab.n_adj() + vocab.n_noun();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(location, 1, e.to_string()))?
        .clone();
    if header.len() != width {
        return Err(Error::parse(
            location,
            1,
            format!("header has {} columns, expected {width}", header.len()),
        ));
    }
    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::parse(location, line, e.to_string()))?;
        if record.len() != width {
            return Err(Error::parse(
                location,
                line,
                format!("{} columns, expected {width}", record.len()),
            ));
        }
        let label = |c: usize| {
            record[c]
                .trim()
                .parse::<u32>()
                .map_err(|e| Error::parse(location, line, format!("column {c}: {e}")))
        };
        let (adj_label, noun_label, anp_label) = (label(0)?, label(1)?, label(2)?);
        let mut probs = Vec::with_capacity(width - 3);
        for c in 3..width {
            let v: f64 = record[c]
                .trim()
                .parse()
                .map_err(|e| Error::parse(location, line, format!("column {c}: {e}")))?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::parse(
                    location,
                    line,
                    format!("column {c}: invalid probability {v}"),
                ));
            }
            probs.push(v);
        }
        let (adj, noun) = probs.split_at(vocab.n_adj());
        let sample = Sample {
            adj_probs: normalize_row(adj, "adjective", location, line)?,
            noun_probs: normalize_row(noun, "noun", location, line)?,
            adj_label,
            noun_label,
            anp_label,
        };
        sample
            .validate(vocab)
            .map_err(|e| Error::parse(location, line, e.to_string()))?;
        samples.push(sample);
    }
    Dataset::new(vocab, samples)
}

fn normalize_row(values: &[f64], what: &str, location: &str, line: usize) -> Result<Vec<f32>> {
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > CSV_SUM_TOLERANCE {
        return Err(Error::parse(
            location,
            line,
            format!("{what} probabilities sum to {sum}"),
        ));
    }
    Ok(values.iter().map(|v| (v / sum) as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::grid(2, 3).unwrap()
    }

    fn sample(anp: u32) -> Sample {
        let v = vocab();
        let (a, n) = v.anp(anp as usize);
        Sample {
            adj_probs: vec![0.25, 0.75],
            noun_probs: vec![0.5, 0.25, 0.25],
            adj_label: a as u32,
            noun_label: n as u32,
            anp_label: anp,
        }
    }

    #[test]
    fn binary_round_trip() {
        let ds = Dataset::new(&vocab(), (0..6).map(sample).collect()).unwrap();
        let bytes = ds.write_to(Vec::new()).unwrap();
        assert_eq!(&bytes[..4], b"ANPD");
        assert_eq!(Dataset::read_from(&bytes[..]).unwrap(), ds);
    }

    #[test]
    fn header_dims_checked_against_vocab() {
        let ds = Dataset::new(&vocab(), vec![sample(0)]).unwrap();
        let other = Vocabulary::grid(1, 3).unwrap();
        assert!(matches!(
            ds.check_vocab(&other),
            Err(Error::DimensionMismatch {
                what: "n_adj",
                file: 2,
                expected: 1
            })
        ));
    }

    #[test]
    fn inconsistent_labels_rejected() {
        let mut s = sample(4);
        s.noun_label = 0;
        assert!(s.validate(&vocab()).is_err());
    }

    #[test]
    fn truncated_and_corrupt_files() {
        let ds = Dataset::new(&vocab(), vec![sample(1), sample(2)]).unwrap();
        let bytes = ds.write_to(Vec::new()).unwrap();
        assert!(matches!(
            Dataset::read_from(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated(_))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Dataset::read_from(&bad[..]), Err(Error::BadMagic { .. })));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            Dataset::read_from(&bad[..]),
            Err(Error::UnsupportedVersion { found: 9, .. })
        ));
        let mut bad = bytes;
        let off = 4 + 2 + 8 + 12 + 12;
        bad[off..off + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(Dataset::read_from(&bad[..]), Err(Error::NonFinite(_))));
    }

    const HEADER: &str = "adj,noun,anp,a0,a1,n0,n1,n2\n";

    #[test]
    fn csv_import_normalizes_small_drift() {
        let text = format!("{HEADER}0,1,1,0.2505,0.75,0.5,0.25,0.25\n");
        let ds = import_csv_from(text.as_bytes(), "t.csv", &vocab()).unwrap();
        let s = &ds.samples[0];
        let sum: f32 = s.adj_probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
        assert_eq!(s.anp_label, 1);
    }

    #[test]
    fn csv_row_summing_to_point_nine_rejected() {
        let text = format!("{HEADER}0,0,0,0.25,0.75,0.5,0.25,0.25\n0,1,1,0.2,0.7,0.5,0.25,0.25\n");
        match import_csv_from(text.as_bytes(), "t.csv", &vocab()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_header_width_checked() {
        let text = "adj,noun,anp,a0\n0,0,0,1\n";
        assert!(matches!(
            import_csv_from(text.as_bytes(), "t.csv", &vocab()),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
