//! Typed configuration with a single dotted-key namespace shared by config
//! files and command-line flags. Files are UTF-8 `key = value` lines with
//! `#` comments; unknown keys are errors so typos never pass silently.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    SsdVae,
    Rnnlm,
    RnnlmRole,
    Classifier,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::SsdVae => "ssdvae",
            ModelKind::Rnnlm => "rnnlm",
            ModelKind::RnnlmRole => "rnnlm-role",
            ModelKind::Classifier => "classifier",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionKind {
    Additive,
    Concat,
}

impl fmt::Display for AttentionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttentionKind::Additive => "additive",
            AttentionKind::Concat => "concat",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterAgg {
    Mean,
    Max,
}

/// All run settings. Field groups mirror the dotted key prefixes.
#[derive(Debug, Clone)]
pub struct Config {
    // model.*
    pub kind: ModelKind,
    pub frames: usize,
    pub vocab: usize,
    pub events: usize,
    pub embed_dim: usize,
    pub role_dim: usize,
    pub enc_layers: usize,
    pub enc_hidden: usize,
    pub dec_layers: usize,
    pub dec_hidden: usize,
    pub temperature: f64,
    pub attention: AttentionKind,
    pub samples: usize,
    pub dropout: f64,
    // train.*
    pub epsilon: f64,
    pub alpha_q: f64,
    pub alpha_c: f64,
    pub learning_rate: f64,
    pub clip: f64,
    pub batch: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
    // mask.*
    pub mask_fixed: bool,
    // data.*
    pub data_train: Option<PathBuf>,
    pub data_valid: Option<PathBuf>,
    pub layout_tup: bool,
    pub embeddings: Option<PathBuf>,
    pub embeddings_trainable: bool,
    // synth.*
    pub synth_frames: usize,
    pub synth_slot_vocab: usize,
    pub synth_events: usize,
    pub synth_train_docs: usize,
    pub synth_valid_docs: usize,
    pub synth_test_docs: usize,
    pub synth_self_loop: f64,
    pub synth_own_mass: f64,
    pub synth_own_tokens: usize,
    // eval.*
    pub eval_chains: usize,
    pub eval_cluster_k: usize,
    pub eval_cluster_agg: ClusterAgg,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            kind: ModelKind::SsdVae,
            frames: 500,
            vocab: 40_000,
            events: 5,
            embed_dim: 300,
            role_dim: 300,
            enc_layers: 2,
            enc_hidden: 512,
            dec_layers: 2,
            dec_hidden: 512,
            temperature: 0.5,
            attention: AttentionKind::Additive,
            samples: 1,
            dropout: 0.15,
            epsilon: 0.5,
            alpha_q: 0.1,
            alpha_c: 0.1,
            learning_rate: 1e-3,
            clip: 5.0,
            batch: 100,
            patience: 10,
            max_epochs: 100,
            seed: 0,
            shuffle: true,
            mask_fixed: false,
            data_train: None,
            data_valid: None,
            layout_tup: false,
            embeddings: None,
            embeddings_trainable: true,
            synth_frames: 10,
            synth_slot_vocab: 50,
            synth_events: 5,
            synth_train_docs: 5000,
            synth_valid_docs: 500,
            synth_test_docs: 500,
            synth_self_loop: 0.6,
            synth_own_mass: 0.8,
            synth_own_tokens: 5,
            eval_chains: 1,
            eval_cluster_k: 10,
            eval_cluster_agg: ClusterAgg::Mean,
        }
    }
}

/// One row per key: (key, documented default, description). This table is
/// the user-facing reference printed by `--help-config`.
pub const KEY_DOCS: &[(&str, &str, &str)] = &[
    ("model.kind", "ssdvae", "ssdvae | rnnlm | rnnlm-role | classifier"),
    ("model.frames", "500", "number of latent frames F"),
    ("model.vocab", "40000", "token vocabulary budget V (incl. reserved)"),
    ("model.events", "5", "events per document M (token count T = 4M)"),
    ("model.embed_dim", "300", "token and frame embedding width d_e"),
    ("model.role_dim", "300", "role embedding width (rnnlm-role only)"),
    ("model.enc_layers", "2", "encoder bi-GRU layer count"),
    ("model.enc_hidden", "512", "encoder hidden size per direction"),
    ("model.dec_layers", "2", "decoder GRU layer count"),
    ("model.dec_hidden", "512", "decoder hidden size"),
    ("model.temperature", "0.5", "relaxed-draw temperature tau (fixed)"),
    ("model.attention", "additive", "additive | concat combination"),
    ("model.samples", "1", "sampled chains S per document per step"),
    ("model.dropout", "0.15", "classifier logit dropout rate"),
    ("train.epsilon", "0.5", "per-event frame observation probability"),
    ("train.alpha_q", "0.1", "entropy-term weight"),
    ("train.alpha_c", "0.1", "classification-term weight"),
    ("train.lr", "0.001", "Adam learning rate"),
    ("train.clip", "5.0", "global gradient-norm clip (<= 0 disables)"),
    ("train.batch", "100", "documents per optimizer step"),
    ("train.patience", "10", "non-improving epochs before early stop"),
    ("train.max_epochs", "100", "hard epoch cap"),
    ("train.seed", "0", "master seed for all named rng streams"),
    ("train.shuffle", "true", "reshuffle training documents each epoch"),
    ("mask.fixed", "false", "draw masks once instead of per epoch"),
    ("data.train", "", "training corpus path"),
    ("data.valid", "", "validation corpus path"),
    ("data.layout_tup", "false", "insert <tup> separators between events"),
    ("data.embeddings", "", "pretrained token-embedding text file"),
    ("data.embeddings_trainable", "true", "update loaded embeddings"),
    ("synth.frames", "10", "synthetic generator frame count"),
    ("synth.slot_vocab", "50", "tokens per slot vocabulary"),
    ("synth.events", "5", "events per synthetic document"),
    ("synth.train_docs", "5000", "synthetic training documents"),
    ("synth.valid_docs", "500", "synthetic validation documents"),
    ("synth.test_docs", "500", "synthetic test documents"),
    ("synth.self_loop", "0.6", "frame self-transition probability"),
    ("synth.own_mass", "0.8", "slot probability mass on a frame's own tokens"),
    ("synth.own_tokens", "5", "own tokens per frame per slot"),
    ("eval.chains", "1", "sampled chains averaged per evaluated document"),
    ("eval.cluster_k", "10", "entries per cluster-report row"),
    ("eval.cluster_agg", "mean", "mean | max aggregation over occurrences"),
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| {
        Error::Config(format!("bad value {value:?} for key {key:?}: {e}"))
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::Config(format!(
            "bad value {other:?} for key {key:?}: expected true or false"
        ))),
    }
}

fn parse_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    if v.is_empty() {
        None
    } else {
        Some(PathBuf::from(v))
    }
}

impl Config {
    /// Apply one `key = value` assignment. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model.kind" => {
                self.kind = match value.trim() {
                    "ssdvae" => ModelKind::SsdVae,
                    "rnnlm" => ModelKind::Rnnlm,
                    "rnnlm-role" => ModelKind::RnnlmRole,
                    "classifier" => ModelKind::Classifier,
                    other => {
                        return Err(Error::Config(format!(
                            "bad value {other:?} for model.kind (ssdvae | rnnlm | rnnlm-role | classifier)"
                        )))
                    }
                }
            }
            "model.frames" => self.frames = parse(key, value)?,
            "model.vocab" => self.vocab = parse(key, value)?,
            "model.events" => self.events = parse(key, value)?,
            "model.embed_dim" => self.embed_dim = parse(key, value)?,
            "model.role_dim" => self.role_dim = parse(key, value)?,
            "model.enc_layers" => self.enc_layers = parse(key, value)?,
            "model.enc_hidden" => self.enc_hidden = parse(key, value)?,
            "model.dec_layers" => self.dec_layers = parse(key, value)?,
            "model.dec_hidden" => self.dec_hidden = parse(key, value)?,
            "model.temperature" => self.temperature = parse(key, value)?,
            "model.attention" => {
                self.attention = match value.trim() {
                    "additive" => AttentionKind::Additive,
                    "concat" => AttentionKind::Concat,
                    other => {
                        return Err(Error::Config(format!(
                            "bad value {other:?} for model.attention (additive | concat)"
                        )))
                    }
                }
            }
            "model.samples" => self.samples = parse(key, value)?,
            "model.dropout" => self.dropout = parse(key, value)?,
            "train.epsilon" => self.epsilon = parse(key, value)?,
            "train.alpha_q" => self.alpha_q = parse(key, value)?,
            "train.alpha_c" => self.alpha_c = parse(key, value)?,
            "train.lr" => self.learning_rate = parse(key, value)?,
            "train.clip" => self.clip = parse(key, value)?,
            "train.batch" => self.batch = parse(key, value)?,
            "train.patience" => self.patience = parse(key, value)?,
            "train.max_epochs" => self.max_epochs = parse(key, value)?,
            "train.seed" => self.seed = parse(key, value)?,
            "train.shuffle" => self.shuffle = parse_bool(key, value)?,
            "mask.fixed" => self.mask_fixed = parse_bool(key, value)?,
            "data.train" => self.data_train = parse_path(value),
            "data.valid" => self.data_valid = parse_path(value),
            "data.layout_tup" => self.layout_tup = parse_bool(key, value)?,
            "data.embeddings" => self.embeddings = parse_path(value),
            "data.embeddings_trainable" => {
                self.embeddings_trainable = parse_bool(key, value)?
            }
            "synth.frames" => self.synth_frames = parse(key, value)?,
            "synth.slot_vocab" => self.synth_slot_vocab = parse(key, value)?,
            "synth.events" => self.synth_events = parse(key, value)?,
            "synth.train_docs" => self.synth_train_docs = parse(key, value)?,
            "synth.valid_docs" => self.synth_valid_docs = parse(key, value)?,
            "synth.test_docs" => self.synth_test_docs = parse(key, value)?,
            "synth.self_loop" => self.synth_self_loop = parse(key, value)?,
            "synth.own_mass" => self.synth_own_mass = parse(key, value)?,
            "synth.own_tokens" => self.synth_own_tokens = parse(key, value)?,
            "eval.chains" => self.eval_chains = parse(key, value)?,
            "eval.cluster_k" => self.eval_cluster_k = parse(key, value)?,
            "eval.cluster_agg" => {
                self.eval_cluster_agg = match value.trim() {
                    "mean" => ClusterAgg::Mean,
                    "max" => ClusterAgg::Max,
                    other => {
                        return Err(Error::Config(format!(
                            "bad value {other:?} for eval.cluster_agg (mean | max)"
                        )))
                    }
                }
            }
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Current value of one key, formatted so `set` parses it back exactly.
    pub fn get(&self, key: &str) -> Option<String> {
        let path = |p: &Option<PathBuf>| {
            p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
        };
        Some(match key {
            "model.kind" => match self.kind {
                ModelKind::SsdVae => "ssdvae".to_string(),
                ModelKind::Rnnlm => "rnnlm".to_string(),
                ModelKind::RnnlmRole => "rnnlm-role".to_string(),
                ModelKind::Classifier => "classifier".to_string(),
            },
            "model.frames" => self.frames.to_string(),
            "model.vocab" => self.vocab.to_string(),
            "model.events" => self.events.to_string(),
            "model.embed_dim" => self.embed_dim.to_string(),
            "model.role_dim" => self.role_dim.to_string(),
            "model.enc_layers" => self.enc_layers.to_string(),
            "model.enc_hidden" => self.enc_hidden.to_string(),
            "model.dec_layers" => self.dec_layers.to_string(),
            "model.dec_hidden" => self.dec_hidden.to_string(),
            "model.temperature" => self.temperature.to_string(),
            "model.attention" => match self.attention {
                AttentionKind::Additive => "additive".to_string(),
                AttentionKind::Concat => "concat".to_string(),
            },
            "model.samples" => self.samples.to_string(),
            "model.dropout" => self.dropout.to_string(),
            "train.epsilon" => self.epsilon.to_string(),
            "train.alpha_q" => self.alpha_q.to_string(),
            "train.alpha_c" => self.alpha_c.to_string(),
            "train.lr" => self.learning_rate.to_string(),
            "train.clip" => self.clip.to_string(),
            "train.batch" => self.batch.to_string(),
            "train.patience" => self.patience.to_string(),
            "train.max_epochs" => self.max_epochs.to_string(),
            "train.seed" => self.seed.to_string(),
            "train.shuffle" => self.shuffle.to_string(),
            "mask.fixed" => self.mask_fixed.to_string(),
            "data.train" => path(&self.data_train),
            "data.valid" => path(&self.data_valid),
            "data.layout_tup" => self.layout_tup.to_string(),
            "data.embeddings" => path(&self.embeddings),
            "data.embeddings_trainable" => self.embeddings_trainable.to_string(),
            "synth.frames" => self.synth_frames.to_string(),
            "synth.slot_vocab" => self.synth_slot_vocab.to_string(),
            "synth.events" => self.synth_events.to_string(),
            "synth.train_docs" => self.synth_train_docs.to_string(),
            "synth.valid_docs" => self.synth_valid_docs.to_string(),
            "synth.test_docs" => self.synth_test_docs.to_string(),
            "synth.self_loop" => self.synth_self_loop.to_string(),
            "synth.own_mass" => self.synth_own_mass.to_string(),
            "synth.own_tokens" => self.synth_own_tokens.to_string(),
            "eval.chains" => self.eval_chains.to_string(),
            "eval.cluster_k" => self.eval_cluster_k.to_string(),
            "eval.cluster_agg" => match self.eval_cluster_agg {
                ClusterAgg::Mean => "mean".to_string(),
                ClusterAgg::Max => "max".to_string(),
            },
            _ => return None,
        })
    }

    /// The full configuration as `key = value` lines, one per known key,
    /// parseable by [`Config::load_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, _, _) in KEY_DOCS {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&self.get(key).expect("documented key must be gettable"));
            out.push('\n');
        }
        out
    }

    /// Parse config text in the file format (used for embedded configs).
    pub fn load_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "{origin}:{}: expected `key = value`, got {raw:?}",
                    lineno + 1
                )));
            };
            self.set(key.trim(), value.trim()).map_err(|e| {
                Error::Config(format!("{origin}:{}: {e}", lineno + 1))
            })?;
        }
        Ok(())
    }

    /// Parse a config file: `key = value` per line, `#` starts a comment.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.load_text(&text, &path.display().to_string())
    }

    /// Range and consistency checks, called once after all sources applied.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.temperature <= 0.0 {
            problems.push("model.temperature must be positive".to_string());
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            problems.push("train.epsilon must lie in [0, 1]".to_string());
        }
        if self.alpha_q < 0.0 || self.alpha_c < 0.0 {
            problems.push("loss weights must be non-negative".to_string());
        }
        if self.samples < 1 {
            problems.push("model.samples must be at least 1".to_string());
        }
        if self.eval_chains < 1 {
            problems.push("eval.chains must be at least 1".to_string());
        }
        for (what, v) in [
            ("model.frames", self.frames),
            ("model.vocab", self.vocab),
            ("model.events", self.events),
            ("model.embed_dim", self.embed_dim),
            ("model.enc_layers", self.enc_layers),
            ("model.enc_hidden", self.enc_hidden),
            ("model.dec_layers", self.dec_layers),
            ("model.dec_hidden", self.dec_hidden),
            ("train.batch", self.batch),
            ("train.max_epochs", self.max_epochs),
        ] {
            if v == 0 {
                problems.push(format!("{what} must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            problems.push("model.dropout must lie in [0, 1]".to_string());
        }
        if !(0.0..1.0).contains(&self.synth_self_loop) {
            problems.push("synth.self_loop must lie in [0, 1)".to_string());
        }
        if !(0.0..=1.0).contains(&self.synth_own_mass) {
            problems.push("synth.own_mass must lie in [0, 1]".to_string());
        }
        if self.synth_own_tokens > self.synth_slot_vocab {
            problems.push("synth.own_tokens cannot exceed synth.slot_vocab".to_string());
        }
        if self.vocab <= crate::data::RESERVED_TOKENS {
            problems.push(format!(
                "model.vocab must exceed the {} reserved entries",
                crate::data::RESERVED_TOKENS
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Tokens per document under the configured layout.
    pub fn tokens_per_document(&self) -> usize {
        if self.layout_tup {
            5 * self.events
        } else {
            4 * self.events
        }
    }
}
