//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("corpus error in {path}: {message}")]
    CorpusFile { path: PathBuf, message: String },

    #[error("numeric failure in {op}: non-finite value")]
    Numeric { op: String },

    #[error("loss is not a scalar (shape {shape:?})")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("loss function is stochastic: two evaluations differ ({a} vs {b})")]
    StochasticLoss { a: f64, b: f64 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("training aborted in epoch {epoch}, batch {batch}: {message}")]
    TrainAbort {
        epoch: usize,
        batch: usize,
        message: String,
    },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
