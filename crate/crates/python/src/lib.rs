//! Python bindings: corpora, training, prediction, metrics and checkpoints.

use pyo3::exceptions::{PyFileNotFoundError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use jointlabel::corpus::{generate_splits, parse_tsv, parse_tsv_str, Sentence, SyntheticConfig};
use jointlabel::diagnostics::{joint_gradient_check, GRADCHECK_EPSILON};
use jointlabel::eval::{self, EvalReport, Granularity};
use jointlabel::trainer::{self, CHECKPOINT_VERSION};
use jointlabel::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::MissingFile { .. } => PyFileNotFoundError::new_err(e.to_string()),
        Error::Divergence(_) | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// `(tokens, token_labels, sentence_label)` as passed from Python.
type RawSentence = (Vec<String>, Option<Vec<bool>>, Option<bool>);
/// Sentence score and `(token, a_hat, a_tilde)` per token.
type RawPrediction = (f64, Vec<(String, f64, f64)>);

/// Labeled sentences. Each sentence carries a binary sentence label and,
/// optionally, one binary label per token.
#[pyclass(name = "Dataset", module = "pyjointlabel", frozen)]
struct PyDataset {
    inner: jointlabel::corpus::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Build from `(tokens, token_labels, sentence_label)` triples; either
    /// label may be None, but not both.
    #[new]
    fn new(sentences: Vec<RawSentence>) -> PyResult<Self> {
        let sentences = sentences
            .into_iter()
            .map(|(tokens, labels, y)| {
                let y = match (y, &labels) {
                    (Some(y), _) => y,
                    (None, Some(l)) => l.iter().any(|&v| v),
                    (None, None) => {
                        return Err(PyValueError::new_err(
                            "sentence needs token labels or a sentence label",
                        ))
                    }
                };
                Sentence::new(tokens, labels, y).map_err(to_py)
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok(PyDataset {
            inner: jointlabel::corpus::Dataset::new(sentences),
        })
    }

    /// Read a corpus file.
    #[staticmethod]
    fn from_tsv(path: &str) -> PyResult<Self> {
        Ok(PyDataset {
            inner: parse_tsv(path).map_err(to_py)?,
        })
    }

    /// Parse corpus text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyDataset {
            inner: parse_tsv_str(text, "<string>").map_err(to_py)?,
        })
    }

    fn to_tsv(&self) -> String {
        self.inner.to_tsv()
    }

    /// `(tokens, token_labels, sentence_label)` triples.
    fn sentences(&self) -> Vec<(Vec<String>, Option<Vec<bool>>, bool)> {
        self.inner
            .iter()
            .map(|s| {
                (
                    s.tokens().to_vec(),
                    s.token_labels().map(<[bool]>::to_vec),
                    s.sentence_label(),
                )
            })
            .collect()
    }

    /// Copy with token labels kept on a seeded subset of `fraction` of the
    /// sentences. Larger fractions keep supersets of smaller ones.
    fn mask_tokens(&self, fraction: f64, seed: u64) -> PyResult<Self> {
        Ok(PyDataset {
            inner: jointlabel::corpus::mask_token_annotation(&self.inner, fraction, seed)
                .map_err(to_py)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset({} sentences, {} positive)",
            self.inner.len(),
            self.inner.positive_count()
        )
    }
}

/// Synthetic trigger-word corpus as `(train, dev, test)`.
#[pyfunction]
#[pyo3(signature = (n_train=2000, n_dev=500, n_test=500, vocab_size=50, n_triggers=2, max_len=12, positive_rate=0.5, seed=1))]
#[allow(clippy::too_many_arguments)]
fn synthetic(
    n_train: usize,
    n_dev: usize,
    n_test: usize,
    vocab_size: usize,
    n_triggers: usize,
    max_len: usize,
    positive_rate: f64,
    seed: u64,
) -> PyResult<(PyDataset, PyDataset, PyDataset)> {
    let s = generate_splits(&SyntheticConfig {
        n_train,
        n_dev,
        n_test,
        vocab_size,
        n_triggers,
        max_len,
        positive_rate,
        seed,
    })
    .map_err(to_py)?;
    let wrap = |inner| PyDataset { inner };
    Ok((wrap(s.train), wrap(s.dev), wrap(s.test)))
}

/// Training settings, addressed by the same keys as the command-line
/// `--set KEY=VALUE` option.
#[pyclass(name = "TrainConfig", module = "pyjointlabel")]
struct PyTrainConfig {
    inner: trainer::TrainConfig,
}

#[pymethods]
impl PyTrainConfig {
    /// Defaults overridden by `settings`; `preset` and `sizes` are applied
    /// before the keys they cover.
    #[new]
    #[pyo3(signature = (settings=None))]
    fn new(settings: Option<std::collections::BTreeMap<String, String>>) -> PyResult<Self> {
        let mut inner = trainer::TrainConfig::default();
        let settings = settings.unwrap_or_default();
        for group in ["preset", "sizes"] {
            if let Some(v) = settings.get(group) {
                inner.set(group, v).map_err(to_py)?;
            }
        }
        for (k, v) in settings
            .iter()
            .filter(|(k, _)| !matches!(k.as_str(), "preset" | "sizes"))
        {
            inner.set(k, v).map_err(to_py)?;
        }
        inner.validate().map_err(to_py)?;
        Ok(PyTrainConfig { inner })
    }

    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.set(key, value).map_err(to_py)
    }

    /// Fully resolved settings.
    fn entries(&self) -> Vec<(&'static str, String)> {
        self.inner.entries()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!("TrainConfig({} settings)", self.inner.entries().len())
    }
}

fn report_dict(py: Python<'_>, r: &EvalReport) -> PyResult<Py<pyo3::types::PyDict>> {
    let d = pyo3::types::PyDict::new(py);
    d.set_item("accuracy", r.accuracy)?;
    d.set_item("precision", r.precision)?;
    d.set_item("recall", r.recall)?;
    d.set_item("f1", r.f1)?;
    d.set_item("f05", r.f05)?;
    d.set_item("tp", r.counts.tp)?;
    d.set_item("fp", r.counts.fp)?;
    d.set_item("fn", r.counts.fn_)?;
    d.set_item("tn", r.counts.tn)?;
    Ok(d.unbind())
}

/// A trained or restored model with its vocabularies.
#[pyclass(name = "Model", module = "pyjointlabel", frozen)]
struct PyModel {
    inner: jointlabel::model::Model,
    config_text: String,
}

#[pymethods]
impl PyModel {
    /// Restore from a checkpoint file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let ck = trainer::load_checkpoint(path).map_err(to_py)?;
        Ok(PyModel {
            inner: ck.model,
            config_text: ck.config_text,
        })
    }

    /// Write a checkpoint. The file is replaced atomically.
    fn save(&self, path: &str) -> PyResult<()> {
        trainer::save_checkpoint(&self.inner, &self.config_text, path).map_err(to_py)
    }

    /// Settings the model was trained with.
    #[getter]
    fn config_text(&self) -> &str {
        &self.config_text
    }

    /// Sentence score and `(token, a_hat, a_tilde)` per token.
    fn predict(&self, tokens: Vec<String>) -> PyResult<RawPrediction> {
        let sentence = Sentence::new(tokens, None, false).map_err(to_py)?;
        let p = eval::predict(&self.inner, &sentence).map_err(to_py)?;
        let tokens = sentence
            .tokens()
            .iter()
            .zip(&p.tokens)
            .map(|(t, tp)| (t.clone(), tp.score, tp.weight))
            .collect();
        Ok((p.score, tokens))
    }

    /// Sentence metrics, plus token metrics when every sentence is
    /// token-labeled.
    fn evaluate(&self, py: Python<'_>, dataset: &PyDataset) -> PyResult<Py<pyo3::types::PyDict>> {
        let e = py
            .detach(|| eval::evaluate(&self.inner, &dataset.inner))
            .map_err(to_py)?;
        let d = pyo3::types::PyDict::new(py);
        d.set_item("sentence", report_dict(py, &e.sentence)?)?;
        match &e.token {
            Some(t) => d.set_item("token", report_dict(py, t)?)?,
            None => d.set_item("token", py.None())?,
        }
        Ok(d.unbind())
    }

    fn __repr__(&self) -> String {
        format!(
            "Model({}, {} words, {} characters)",
            self.inner.params.arch.name(),
            self.inner.words.len(),
            self.inner.chars.len()
        )
    }
}

/// Train with early stopping. Returns the best-epoch model, the history CSV,
/// the best epoch and its dev measure.
#[pyfunction]
fn train(
    py: Python<'_>,
    config: &PyTrainConfig,
    train: &PyDataset,
    dev: &PyDataset,
) -> PyResult<(PyModel, String, usize, f64)> {
    let cfg = config.inner.clone();
    let out = py
        .detach(|| trainer::train(&cfg, &train.inner, &dev.inner, None))
        .map_err(to_py)?;
    Ok((
        PyModel {
            inner: out.model,
            config_text: cfg.to_text(),
        },
        out.history.to_csv(),
        out.best_epoch,
        out.best_metric,
    ))
}

/// Weighted harmonic mean of precision and recall; 0 when both are 0.
#[pyfunction]
fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    eval::f_beta(precision, recall, beta)
}

/// Accuracy, precision, recall, F1 and F0.5 of aligned label sequences.
#[pyfunction]
fn metrics(
    py: Python<'_>,
    predicted: Vec<bool>,
    gold: Vec<bool>,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let r = eval::compute_metrics(&predicted, &gold, Granularity::Token).map_err(to_py)?;
    report_dict(py, &r)
}

/// Largest finite-difference relative gradient error on a tiny joint model.
#[pyfunction]
#[pyo3(signature = (seed=1))]
fn gradcheck(py: Python<'_>, seed: u64) -> PyResult<f64> {
    let r = py
        .detach(|| joint_gradient_check(seed, GRADCHECK_EPSILON))
        .map_err(to_py)?;
    Ok(r.max_relative_error)
}

#[pymodule]
fn pyjointlabel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(f_beta, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add("CHECKPOINT_VERSION", CHECKPOINT_VERSION)?;
    m.add("THRESHOLD", eval::THRESHOLD)?;
    Ok(())
}
