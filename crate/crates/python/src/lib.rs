//! Python module `anpnet`: vocabulary and dataset handling, fusion network
//! training and inference, relevance reports and the analyses built on them.

use std::path::PathBuf;

use anpnet_core::analysis::{self, AnrMode};
use anpnet_core::checkpoint::{load_checkpoint, save_checkpoint};
use anpnet_core::dataio::{self, Signal, SynthConfig};
use anpnet_core::fusion::{self, FusionDims, TrainConfig};
use anpnet_core::metrics::{concept_accuracies, Concept};
use anpnet_core::relevance;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: anpnet_core::Error) -> PyErr {
    match e {
        anpnet_core::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "Vocabulary", module = "anpnet", from_py_object)]
#[derive(Clone)]
struct PyVocabulary {
    inner: dataio::Vocabulary,
}

#[pymethods]
impl PyVocabulary {
    #[new]
    fn new(adjectives: Vec<String>, nouns: Vec<String>, anps: Vec<(u32, u32)>) -> PyResult<Self> {
        let inner = dataio::Vocabulary::new(adjectives, nouns, anps).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Every adjective paired with every noun.
    #[staticmethod]
    fn grid(n_adj: usize, n_noun: usize) -> PyResult<Self> {
        Ok(Self {
            inner: dataio::Vocabulary::grid(n_adj, n_noun).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: dataio::Vocabulary::load(&dir).map_err(to_py)?,
        })
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.save(&dir).map_err(to_py)
    }

    #[getter]
    fn adjectives(&self) -> Vec<String> {
        self.inner.adjectives().to_vec()
    }

    #[getter]
    fn nouns(&self) -> Vec<String> {
        self.inner.nouns().to_vec()
    }

    #[getter]
    fn anps(&self) -> Vec<(u32, u32)> {
        self.inner.anps().to_vec()
    }

    fn anp_name(&self, k: usize) -> PyResult<String> {
        if k >= self.inner.n_anp() {
            return Err(PyValueError::new_err(format!("ANP {k} out of range")));
        }
        Ok(self.inner.anp_name(k))
    }

    fn find_anp(&self, key: &str) -> Option<usize> {
        self.inner.find_anp(key)
    }

    /// Warnings from the vocabulary checks, as strings.
    fn validate(&self) -> Vec<String> {
        self.inner.validate().warnings.iter().map(ToString::to_string).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.n_anp()
    }

    fn __repr__(&self) -> String {
        format!(
            "Vocabulary(adjectives={}, nouns={}, anps={})",
            self.inner.n_adj(),
            self.inner.n_noun(),
            self.inner.n_anp()
        )
    }
}

#[pyclass(name = "Dataset", module = "anpnet", from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: dataio::Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[pyo3(signature = (path, vocab=None))]
    fn read(path: PathBuf, vocab: Option<&PyVocabulary>) -> PyResult<Self> {
        let inner = dataio::Dataset::read(&path, vocab.map(|v| &v.inner)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn import_csv(path: PathBuf, vocab: &PyVocabulary) -> PyResult<Self> {
        Ok(Self {
            inner: dataio::import_csv(&path, &vocab.inner).map_err(to_py)?,
        })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write(&path).map_err(to_py)
    }

    /// `(train, test)` split stratified by ANP label.
    fn split(&self, train_fraction: f64, seed: u64) -> PyResult<(Self, Self)> {
        let (train, test) = dataio::stratified_split(&self.inner.samples, train_fraction, seed).map_err(to_py)?;
        let d = &self.inner;
        let wrap = |samples| Self {
            inner: dataio::Dataset {
                n_adj: d.n_adj,
                n_noun: d.n_noun,
                n_anp: d.n_anp,
                samples,
            },
        };
        Ok((wrap(train), wrap(test)))
    }

    fn adj_probs(&self) -> Vec<Vec<f32>> {
        self.inner.samples.iter().map(|s| s.adj_probs.clone()).collect()
    }

    fn noun_probs(&self) -> Vec<Vec<f32>> {
        self.inner.samples.iter().map(|s| s.noun_probs.clone()).collect()
    }

    /// `(adjective, noun, anp)` label triples.
    fn labels(&self) -> Vec<(u32, u32, u32)> {
        self.inner
            .samples
            .iter()
            .map(|s| (s.adj_label, s.noun_label, s.anp_label))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Synthetic dataset over a full adjective × noun grid, or over `anps`.
#[pyfunction]
#[pyo3(signature = (n_adj, n_noun, samples_per_anp, adj_signal, noun_signal, seed, noise_temp=1.0, anps=None, duplicate_pairs=Vec::new()))]
#[allow(clippy::too_many_arguments)]
fn synth(
    n_adj: usize,
    n_noun: usize,
    samples_per_anp: usize,
    adj_signal: f64,
    noun_signal: f64,
    seed: u64,
    noise_temp: f64,
    anps: Option<Vec<(u32, u32)>>,
    duplicate_pairs: Vec<(usize, usize)>,
) -> PyResult<(PyVocabulary, PyDataset)> {
    let config = SynthConfig {
        anps,
        adj_signal: Signal::Uniform(adj_signal),
        noun_signal: Signal::Uniform(noun_signal),
        noise_temp,
        duplicate_pairs,
        ..SynthConfig::grid(n_adj, n_noun, samples_per_anp, 0.0, seed)
    };
    let (vocab, samples) = dataio::synth_generate(&config).map_err(to_py)?;
    let data = dataio::Dataset::new(&vocab, samples).map_err(to_py)?;
    Ok((PyVocabulary { inner: vocab }, PyDataset { inner: data }))
}

#[pyclass(name = "FusionNetwork", module = "anpnet")]
struct PyFusionNetwork {
    inner: fusion::FusionNetwork,
}

#[pymethods]
impl PyFusionNetwork {
    /// Freshly initialized network; `hidden` defaults to 1024 units.
    #[staticmethod]
    #[pyo3(signature = (n_adj, n_noun, n_anp, seed, hidden=FusionDims::REFERENCE.hidden))]
    fn build(n_adj: usize, n_noun: usize, n_anp: usize, seed: u64, hidden: usize) -> PyResult<Self> {
        let dims = FusionDims::new(n_adj, n_noun, hidden, n_anp);
        Ok(Self {
            inner: fusion::FusionNetwork::build(dims, seed).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_checkpoint(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&self.inner, &path).map_err(to_py)
    }

    /// `(n_adj, n_noun, hidden, n_anp)`.
    #[getter]
    fn dims(&self) -> (usize, usize, usize, usize) {
        let d = self.inner.dims();
        (d.n_adj, d.n_noun, d.hidden, d.n_anp)
    }

    /// Trains in place and returns one dict per epoch.
    #[pyo3(signature = (dataset, seed, epochs=30, batch_size=128, learning_rate=0.01, momentum=0.9, weight_decay=1e-4))]
    #[allow(clippy::too_many_arguments)]
    fn train<'py>(
        &mut self,
        py: Python<'py>,
        dataset: &PyDataset,
        seed: u64,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        momentum: f64,
        weight_decay: f64,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let config = TrainConfig {
            epochs,
            batch_size,
            learning_rate,
            momentum,
            weight_decay,
            ..TrainConfig::with_seed(seed)
        };
        let net = &mut self.inner;
        let samples = &dataset.inner.samples;
        let history = py.detach(|| fusion::train(net, samples, &config)).map_err(to_py)?;
        history
            .epochs
            .iter()
            .map(|e| {
                let d = PyDict::new(py);
                d.set_item("epoch", e.epoch)?;
                d.set_item("train_loss", e.train_loss)?;
                d.set_item("train_top1", e.train_top1)?;
                Ok(d)
            })
            .collect()
    }

    /// ANP probabilities for one pair of specialist outputs.
    fn predict(&self, adj_probs: Vec<f32>, noun_probs: Vec<f32>) -> PyResult<Vec<f64>> {
        self.inner.predict(&adj_probs, &noun_probs).map_err(to_py)
    }

    fn predict_dataset(&self, py: Python<'_>, dataset: &PyDataset) -> PyResult<Vec<Vec<f64>>> {
        py.detach(|| self.inner.predict_batch(&dataset.inner.samples))
            .map_err(to_py)
    }

    /// Top-k accuracy (percent) per concept: `{"Adj": .., "Noun": .., "ANP": ..}`.
    #[pyo3(signature = (dataset, k=5))]
    fn accuracy<'py>(&self, py: Python<'py>, dataset: &PyDataset, k: usize) -> PyResult<Bound<'py, PyDict>> {
        let samples = &dataset.inner.samples;
        let probs = self.inner.predict_batch(samples).map_err(to_py)?;
        let tables = concept_accuracies(samples, &probs, self.inner.dims().n_anp, k).map_err(to_py)?;
        let d = PyDict::new(py);
        for c in Concept::ALL {
            d.set_item(c.name(), tables[c as usize].overall())?;
        }
        Ok(d)
    }
}

/// Relevance of every adjective and noun for `target`.
#[pyfunction]
fn explain<'py>(
    py: Python<'py>,
    net: &PyFusionNetwork,
    adj_probs: Vec<f32>,
    noun_probs: Vec<f32>,
    target: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let r = relevance::explain(&net.inner, &adj_probs, &noun_probs, target).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("target", r.target_anp)?;
    d.set_item("root_relevance", r.root_relevance)?;
    d.set_item("adj_contrib", r.adj_contrib)?;
    d.set_item("noun_contrib", r.noun_contrib)?;
    d.set_item("degenerate", r.degenerate)?;
    Ok(d)
}

fn parse_mode(mode: &str) -> PyResult<AnrMode> {
    mode.parse().map_err(to_py)
}

/// `(anp, mean ANR, events)` for every ANP with at least one usable event.
#[pyfunction]
#[pyo3(signature = (net, dataset, mode="all-top5", k=5))]
fn anr_table(net: &PyFusionNetwork, dataset: &PyDataset, mode: &str, k: usize) -> PyResult<Vec<(usize, f64, usize)>> {
    let table = analysis::anr_table(&net.inner, &dataset.inner.samples, parse_mode(mode)?, k).map_err(to_py)?;
    Ok(table.records.iter().map(|r| (r.anp, r.anr, r.n_samples)).collect())
}

/// `(anp, "adjective" | "noun" | "boundary")` labels.
#[pyfunction]
#[pyo3(signature = (net, dataset, mode="all-top5", k=5))]
fn orientation(
    net: &PyFusionNetwork,
    dataset: &PyDataset,
    mode: &str,
    k: usize,
) -> PyResult<Vec<(usize, &'static str)>> {
    let table = analysis::anr_table(&net.inner, &dataset.inner.samples, parse_mode(mode)?, k).map_err(to_py)?;
    Ok(analysis::classify_orientation(&table.records)
        .iter()
        .map(|l| (l.anp, l.orientation.as_str()))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (net, dataset, k=5))]
fn visually_equivalent(net: &PyFusionNetwork, dataset: &PyDataset, k: usize) -> PyResult<Vec<(usize, usize)>> {
    let profiles = analysis::contribution_profiles(&net.inner, &dataset.inner.samples, k).map_err(to_py)?;
    Ok(analysis::visually_equivalent(&profiles, k))
}

/// `{anp: (adjectives, nouns)}`, each a list of `(name, mean contribution)`.
#[pyfunction]
#[pyo3(signature = (net, dataset, vocab, k=5))]
fn related_concepts<'py>(
    py: Python<'py>,
    net: &PyFusionNetwork,
    dataset: &PyDataset,
    vocab: &PyVocabulary,
    k: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let profiles = analysis::contribution_profiles(&net.inner, &dataset.inner.samples, k).map_err(to_py)?;
    let d = PyDict::new(py);
    for p in &profiles {
        let r = analysis::related_concepts(p, &vocab.inner, k).map_err(to_py)?;
        d.set_item(r.anp, (r.adjectives, r.nouns))?;
    }
    Ok(d)
}

#[pymodule]
fn anpnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVocabulary>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyFusionNetwork>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(explain, m)?)?;
    m.add_function(wrap_pyfunction!(anr_table, m)?)?;
    m.add_function(wrap_pyfunction!(orientation, m)?)?;
    m.add_function(wrap_pyfunction!(visually_equivalent, m)?)?;
    m.add_function(wrap_pyfunction!(related_concepts, m)?)?;
    Ok(())
}
