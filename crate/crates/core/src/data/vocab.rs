//! Token and frame-label vocabularies. Four token indices are reserved;
//! the rest are filled by corpus frequency (ties broken lexicographically).

use std::collections::HashMap;

use super::corpus::EventDocument;
use super::SLOTS_PER_EVENT;

pub const UNK: usize = 0;
pub const BOS: usize = 1;
pub const NONE: usize = 2;
pub const TUP: usize = 3;
pub const RESERVED_TOKENS: usize = 4;

pub const UNK_TOKEN: &str = "<unk>";
pub const BOS_TOKEN: &str = "<bos>";
pub const NONE_TOKEN: &str = "None";
pub const TUP_TOKEN: &str = "<tup>";

const RESERVED: [&str; RESERVED_TOKENS] = [UNK_TOKEN, BOS_TOKEN, NONE_TOKEN, TUP_TOKEN];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    token_index: HashMap<String, usize>,
    frames: Vec<String>,
    frame_index: HashMap<String, usize>,
}

fn ranked_by_frequency(counts: HashMap<String, usize>) -> Vec<String> {
    let mut items: Vec<(String, usize)> = counts.into_iter().collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    items.into_iter().map(|(t, _)| t).collect()
}

impl Vocabulary {
    /// Count the corpus and keep the top `max_tokens - 4` tokens and the top
    /// `max_frames` frame labels.
    pub fn build(corpus: &[EventDocument], max_tokens: usize, max_frames: usize) -> Vocabulary {
        assert!(
            max_tokens > RESERVED_TOKENS,
            "vocabulary budget must exceed the {RESERVED_TOKENS} reserved tokens"
        );
        let mut token_counts: HashMap<String, usize> = HashMap::new();
        let mut frame_counts: HashMap<String, usize> = HashMap::new();
        for doc in corpus {
            for tok in doc.tokens() {
                if !RESERVED.contains(&tok.as_str()) {
                    *token_counts.entry(tok.clone()).or_default() += 1;
                }
            }
            for frame in doc.frames().iter().flatten() {
                *frame_counts.entry(frame.clone()).or_default() += 1;
            }
        }
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(
            ranked_by_frequency(token_counts)
                .into_iter()
                .take(max_tokens - RESERVED_TOKENS),
        );
        let frames: Vec<String> = ranked_by_frequency(frame_counts)
            .into_iter()
            .take(max_frames)
            .collect();
        Vocabulary::from_parts(tokens, frames)
    }

    /// Rebuild from stored index-ordered lists (checkpoint load).
    pub fn from_parts(tokens: Vec<String>, frames: Vec<String>) -> Vocabulary {
        assert!(
            tokens.len() >= RESERVED_TOKENS
                && RESERVED.iter().zip(&tokens).all(|(r, t)| r == t),
            "token list must start with the reserved entries"
        );
        let token_index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let frame_index = frames
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i))
            .collect();
        Vocabulary {
            tokens,
            token_index,
            frames,
            frame_index,
        }
    }

    pub fn num_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn frame_labels(&self) -> &[String] {
        &self.frames
    }

    /// Out-of-vocabulary tokens map to the unknown index.
    pub fn token_id(&self, token: &str) -> usize {
        self.token_index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token_str(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// Unknown labels get `None`; callers treat them as unobserved.
    pub fn frame_id(&self, label: &str) -> Option<usize> {
        self.frame_index.get(label).copied()
    }

    pub fn frame_label(&self, id: usize) -> &str {
        &self.frames[id]
    }

    /// Token indices of a document. With `separators` a `<tup>` token is
    /// appended after each event's 4 slots, giving T = 5M.
    pub fn encode_tokens(&self, doc: &EventDocument, separators: bool) -> Vec<usize> {
        let mut out = Vec::with_capacity(doc.tokens().len() + doc.events());
        for m in 0..doc.events() {
            for tok in doc.event_tokens(m) {
                out.push(self.token_id(tok));
            }
            if separators {
                out.push(TUP);
            }
        }
        out
    }

    /// Per-event gold frame indices; the second value counts labels that
    /// fell outside the kept inventory (reported, treated as absent).
    pub fn encode_frames(&self, doc: &EventDocument) -> (Vec<Option<usize>>, usize) {
        let mut unknown = 0;
        let ids = doc
            .frames()
            .iter()
            .map(|f| match f {
                None => None,
                Some(label) => {
                    let id = self.frame_id(label);
                    if id.is_none() {
                        unknown += 1;
                    }
                    id
                }
            })
            .collect();
        (ids, unknown)
    }

    /// Which event a token-stream position belongs to under either layout.
    pub fn event_of_position(separators: bool, t: usize) -> usize {
        t / if separators { SLOTS_PER_EVENT + 1 } else { SLOTS_PER_EVENT }
    }
}
