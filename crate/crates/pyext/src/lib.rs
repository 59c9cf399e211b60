//! Python bindings: configuration, training, checkpoints, evaluation, and
//! the Gumbel-Softmax primitives, all driven in-process.
//!
//! Build with `cargo build -p ssdvae-py`, then import the produced cdylib
//! (see python/smoke_test.py for the rename-and-import dance).

use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ssdvae::config::Config as CoreConfig;
use ssdvae::data::{build_inc, parse_corpus, parse_inc, serialize_corpus, serialize_inc,
    synth_generate, EventDocument, SyntheticSpec};
use ssdvae::data::{hmm_oracle_ppl, Vocabulary};
use ssdvae::error::Error;
use ssdvae::eval;
use ssdvae::gumbel;
use ssdvae::rng::{substream, STREAM_GEN, STREAM_GUMBEL, STREAM_INC, STREAM_SYNTH};
use ssdvae::trainer::{encode_corpus, fit, Checkpoint, EncodedCorpus, TrainTarget};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Corpus(_) | Error::CorpusFile { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn read_docs(path: &str) -> PyResult<Vec<EventDocument>> {
    let read = parse_corpus(Path::new(path)).map_err(to_py)?;
    Ok(read.documents)
}

/// Run settings as `key = value` pairs with typed validation.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Config {
    inner: CoreConfig,
}

#[pymethods]
impl Config {
    #[new]
    fn new() -> Self {
        Config { inner: CoreConfig::default() }
    }

    /// Apply a config file over the current values.
    fn load(&mut self, path: &str) -> PyResult<()> {
        self.inner.load_file(Path::new(path)).map_err(to_py)
    }

    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.set(key, value).map_err(to_py)
    }

    fn get(&self, key: &str) -> PyResult<String> {
        self.inner
            .get(key)
            .ok_or_else(|| PyKeyError::new_err(format!("unknown config key {key:?}")))
    }

    /// The full configuration as config-file text.
    fn text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!("Config(kind={}, seed={})", self.inner.kind, self.inner.seed)
    }
}

/// A trained model plus everything needed to evaluate it: the stored
/// config, vocabulary, and best-validation parameters.
#[pyclass]
struct Model {
    checkpoint: Checkpoint,
    target: TrainTarget,
}

impl Model {
    fn from_checkpoint(checkpoint: Checkpoint) -> PyResult<Model> {
        let target = checkpoint.rebuild().map_err(to_py)?;
        Ok(Model { checkpoint, target })
    }

    fn encode(&self, docs: &[EventDocument]) -> EncodedCorpus {
        encode_corpus(docs, &self.checkpoint.vocab, self.target.separators())
    }

    fn scorer(&self) -> PyResult<eval::ScoreTarget<'_>> {
        self.target.score_target().ok_or_else(|| {
            PyValueError::new_err("this checkpoint holds a classifier, not a generative model")
        })
    }
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Model> {
        Model::from_checkpoint(Checkpoint::load(Path::new(path)).map_err(to_py)?)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.checkpoint.save(Path::new(path)).map_err(to_py)
    }

    #[getter]
    fn kind(&self) -> String {
        self.checkpoint.config.kind.to_string()
    }

    #[getter]
    fn epoch(&self) -> u64 {
        self.checkpoint.epoch
    }

    #[getter]
    fn best_val_ppl(&self) -> f64 {
        self.checkpoint.best_val_ppl
    }

    #[getter]
    fn num_tokens(&self) -> usize {
        self.checkpoint.vocab.num_tokens()
    }

    #[getter]
    fn num_frames(&self) -> usize {
        self.checkpoint.vocab.num_frames()
    }

    #[getter]
    fn config(&self) -> Config {
        Config { inner: self.checkpoint.config.clone() }
    }

    /// Per-word perplexity on a corpus file (frames never observed).
    fn perplexity(&self, corpus: &str) -> PyResult<f64> {
        let docs = read_docs(corpus)?;
        let encoded = self.encode(&docs);
        let cfg = &self.checkpoint.config;
        eval::perplexity(&self.scorer()?, &encoded.streams, cfg.seed, cfg.eval_chains)
            .map_err(to_py)
    }

    /// Inverse-narrative-cloze accuracy on a cloze file; returns
    /// (accuracy, ties, samples).
    fn inc_accuracy(&self, inc: &str) -> PyResult<(f64, usize, usize)> {
        let read = parse_inc(Path::new(inc)).map_err(to_py)?;
        let cfg = &self.checkpoint.config;
        let out = eval::inc_accuracy(
            &self.scorer()?,
            &read.samples,
            &self.checkpoint.vocab,
            cfg.seed,
            cfg.eval_chains,
        )
        .map_err(to_py)?;
        Ok((out.accuracy, out.ties, out.samples))
    }

    /// Frame prediction quality on single-event labeled documents.
    fn frame_metrics<'py>(&self, py: Python<'py>, corpus: &str) -> PyResult<Bound<'py, PyDict>> {
        let docs = read_docs(corpus)?;
        let encoded = self.encode(&docs);
        let mut events = Vec::new();
        let mut gold = Vec::new();
        for (i, frames) in encoded.frames.iter().enumerate() {
            if frames.len() != 1 {
                continue;
            }
            if let Some(f) = frames[0] {
                events.push(encoded.streams[i].clone());
                gold.push(f);
            }
        }
        if events.is_empty() {
            return Err(PyValueError::new_err(
                "no single-event documents with frame labels in this corpus",
            ));
        }
        let preds = match &self.target {
            TrainTarget::SsdVae(m) => eval::model_frame_predictions(m, &events),
            TrainTarget::Classifier(m) => eval::classifier_frame_predictions(m, &events),
            TrainTarget::Lm(_) => {
                return Err(PyValueError::new_err(
                    "plain language models have no frame output",
                ))
            }
        };
        let m = eval::frame_classification_metrics(&preds, &gold);
        let out = PyDict::new(py);
        out.set_item("accuracy", m.accuracy)?;
        out.set_item("macro_precision", m.macro_precision)?;
        out.set_item("macro_recall", m.macro_recall)?;
        out.set_item("macro_f1", m.macro_f1)?;
        out.set_item("events", gold.len())?;
        Ok(out)
    }

    /// Sample a script from a four-token seed event. Returns
    /// [(frame_label, [verb, subject, object, modifier]), ...].
    #[pyo3(signature = (seed_event, num_events=5, temperature=1.0))]
    fn generate(
        &self,
        seed_event: Vec<String>,
        num_events: usize,
        temperature: f64,
    ) -> PyResult<Vec<(String, Vec<String>)>> {
        let TrainTarget::SsdVae(model) = &self.target else {
            return Err(PyValueError::new_err("generation needs a frame model"));
        };
        if seed_event.len() != 4 {
            return Err(PyValueError::new_err(format!(
                "seed_event needs exactly 4 tokens, got {}",
                seed_event.len()
            )));
        }
        let vocab = &self.checkpoint.vocab;
        let seed = [
            vocab.token_id(&seed_event[0]),
            vocab.token_id(&seed_event[1]),
            vocab.token_id(&seed_event[2]),
            vocab.token_id(&seed_event[3]),
        ];
        let mut rng = substream(self.checkpoint.config.seed, STREAM_GEN, &[]);
        let script = model
            .generate_script(&model.params, seed, num_events, temperature, &mut rng)
            .map_err(to_py)?;
        Ok(script
            .into_iter()
            .map(|(frame, event)| {
                let label = if frame < vocab.num_frames() {
                    vocab.frame_label(frame).to_string()
                } else {
                    format!("f{frame}")
                };
                let tokens = event.iter().map(|&t| vocab.token_str(t).to_string()).collect();
                (label, tokens)
            })
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(kind={}, epoch={}, best_val_ppl={:.4})",
            self.checkpoint.config.kind, self.checkpoint.epoch, self.checkpoint.best_val_ppl
        )
    }
}

/// Train a model on corpus files; returns the best-validation model and
/// the per-epoch log lines.
#[pyfunction]
fn train(cfg: &Config, train_path: &str, valid_path: &str) -> PyResult<(Model, Vec<String>)> {
    let train_docs = read_docs(train_path)?;
    let valid_docs = read_docs(valid_path)?;
    let mut cfg = cfg.inner.clone();
    let vocab = Vocabulary::build(&train_docs, cfg.vocab, cfg.frames);
    cfg.set("model.vocab", &vocab.num_tokens().to_string()).map_err(to_py)?;

    let mut target = TrainTarget::build(&cfg).map_err(to_py)?;
    if let Some(emb_path) = cfg.embeddings.clone() {
        target.load_embeddings(&emb_path, &vocab).map_err(to_py)?;
    }
    let train_corpus = encode_corpus(&train_docs, &vocab, target.separators());
    let valid_corpus = encode_corpus(&valid_docs, &vocab, target.separators());
    let (checkpoint, logs) =
        fit(&mut target, &train_corpus, &valid_corpus, &cfg, &vocab).map_err(to_py)?;
    let lines = logs.iter().map(|l| l.line()).collect();
    Ok((Model::from_checkpoint(checkpoint)?, lines))
}

/// Write train/valid/test splits of the configured synthetic corpus into
/// `out_dir`; returns [(file_name, oracle_ppl)] for the three splits.
#[pyfunction]
fn synthesize(cfg: &Config, out_dir: &str) -> PyResult<Vec<(String, f64)>> {
    let cfg = &cfg.inner;
    let spec = SyntheticSpec {
        frames: cfg.synth_frames,
        slot_vocab: cfg.synth_slot_vocab,
        events: cfg.synth_events,
        own_tokens: cfg.synth_own_tokens,
        own_mass: cfg.synth_own_mass,
        self_loop: cfg.synth_self_loop,
    };
    let dir = PathBuf::from(out_dir);
    std::fs::create_dir_all(&dir).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let splits = [
        ("train.txt", cfg.synth_train_docs, 0u64),
        ("valid.txt", cfg.synth_valid_docs, 1),
        ("test.txt", cfg.synth_test_docs, 2),
    ];
    let mut out = Vec::new();
    for (name, count, part) in splits {
        let mut rng = substream(cfg.seed, STREAM_SYNTH, &[part]);
        let docs = synth_generate(&spec, count, &mut rng).map_err(to_py)?;
        serialize_corpus(&docs, &dir.join(name)).map_err(to_py)?;
        out.push((name.to_string(), hmm_oracle_ppl(&spec, &docs).map_err(to_py)?));
    }
    Ok(out)
}

/// Build an inverse-narrative-cloze file from a corpus; returns the number
/// of cloze sets written.
#[pyfunction]
#[pyo3(signature = (cfg, corpus, out, samples=2000))]
fn build_cloze(cfg: &Config, corpus: &str, out: &str, samples: usize) -> PyResult<usize> {
    let docs = read_docs(corpus)?;
    let mut rng = substream(cfg.inner.seed, STREAM_INC, &[]);
    let built = build_inc(&docs, samples, &mut rng).map_err(to_py)?;
    serialize_inc(&built, Path::new(out)).map_err(to_py)?;
    Ok(built.len())
}

/// One relaxed categorical sample: softmax((logits + gumbel) / tau).
#[pyfunction]
fn gumbel_softmax(logits: Vec<f64>, tau: f64, seed: u64) -> PyResult<Vec<f64>> {
    if logits.is_empty() {
        return Err(PyValueError::new_err("logits must be non-empty"));
    }
    let mut rng = substream(seed, STREAM_GUMBEL, &[]);
    let noise = gumbel::gumbel_noise(logits.len(), &mut rng);
    Ok(gumbel::gumbel_softmax_sample(&logits, tau, &noise))
}

/// Seeded standard-Gumbel draws.
#[pyfunction]
fn gumbel_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, STREAM_GUMBEL, &[]);
    gumbel::gumbel_noise(n, &mut rng)
}

/// Shannon entropy (nats) of a probability vector.
#[pyfunction]
fn entropy(p: Vec<f64>) -> f64 {
    gumbel::entropy(&p)
}

#[pymodule]
fn ssdvae_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Config>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(build_cloze, m)?)?;
    m.add_function(wrap_pyfunction!(gumbel_softmax, m)?)?;
    m.add_function(wrap_pyfunction!(gumbel_noise, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    Ok(())
}
