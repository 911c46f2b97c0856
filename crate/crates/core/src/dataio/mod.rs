//! Vocabulary and dataset representation, file formats, splitting, and the
//! synthetic generator.

mod dataset;
mod split;
mod synth;
mod vocab;

pub use dataset::{
    import_csv, import_csv_from, Dataset, Sample, CSV_SUM_TOLERANCE, DATASET_MAGIC, DATASET_VERSION,
    SAMPLE_SUM_TOLERANCE,
};
pub use split::stratified_split;
pub use synth::{synth_generate, Signal, SynthConfig};
pub use vocab::{
    VocabReport, VocabWarning, Vocabulary, ADJECTIVES_FILE, ANPS_FILE, MIN_NOUNS_PER_ADJECTIVE, NOUNS_FILE,
};
