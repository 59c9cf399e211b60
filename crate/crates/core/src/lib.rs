//! Semi-supervised sequential discrete VAE for event-script modeling.
//!
//! Documents are sequences of M events, each a 4-slot tuple (verb, subject,
//! object, modifier). A chain of discrete frame variables, relaxed through
//! Gumbel-Softmax samples, separates a bidirectional GRU encoder from an
//! autoregressive GRU decoder. Frame labels may be partially observed during
//! training and are injected into the encoder logits scaled by their norm.
//!
//! The workspace is self-contained: a minimal reverse-mode autodiff engine
//! ([`diffcore`]), recurrent building blocks ([`seqnets`]), the encoder and
//! decoder ([`encoder`], [`decoder`]), the training objective ([`objective`]),
//! corpus tooling with a synthetic generator and an exact HMM perplexity
//! oracle ([`data`]), a deterministic trainer ([`trainer`]), evaluation
//! harnesses ([`eval`]), autoregressive baselines ([`baselines`]) and a batch
//! CLI ([`cli`]).

pub mod baselines;
pub mod cli;
pub mod config;
pub mod data;
pub mod decoder;
pub mod diffcore;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod gumbel;
pub mod model;
pub mod objective;
pub mod rng;
pub mod seqnets;
pub mod trainer;

pub use error::Error;
