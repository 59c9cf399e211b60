//! Corpus ingestion and serialization, vocabulary construction, epsilon
//! masking of frame observations, synthetic frame-HMM corpora with an exact
//! perplexity oracle, and inverse-narrative-cloze set construction.

pub mod corpus;
pub mod inc;
pub mod mask;
pub mod synth;
pub mod vocab;

pub use corpus::{parse_corpus, serialize_corpus, serialize_document, CorpusRead, EventDocument};
pub use inc::{build_inc, parse_inc, serialize_inc, IncRead, IncSample, INC_EVENTS, INC_OPTIONS};
pub use mask::{mask_frames, mask_from_uniforms};
pub use synth::{hmm_oracle_ppl, synth_generate, SyntheticSpec};
pub use vocab::{
    Vocabulary, BOS, BOS_TOKEN, NONE, NONE_TOKEN, RESERVED_TOKENS, TUP, TUP_TOKEN, UNK, UNK_TOKEN,
};

/// Slots of one event, in serialization order.
pub const SLOTS_PER_EVENT: usize = 4;
