//! Synthetic frame-HMM corpora: a hidden frame chain with a parametric
//! transition matrix emits 4 slot tokens per event. Because the generator
//! is known exactly, the forward algorithm gives the true per-word
//! perplexity — the oracle the learned models are judged against.

use rand::Rng;

use super::corpus::EventDocument;
use super::SLOTS_PER_EVENT;
use crate::error::{Error, Result};

const SLOT_PREFIXES: [&str; SLOTS_PER_EVENT] = ["v", "s", "o", "m"];

/// Parameters of the generating process. Frame f owns `own_tokens`
/// consecutive tokens in each slot vocabulary and places `own_mass` on
/// them; the rest of the mass is uniform over the whole slot vocabulary.
/// Transitions put `self_loop` on staying and split the remainder between
/// the two successors (f+1) mod F and (f+2) mod F. The initial frame is
/// uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub frames: usize,
    pub slot_vocab: usize,
    pub events: usize,
    pub own_tokens: usize,
    pub own_mass: f64,
    pub self_loop: f64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.frames == 0 {
            problems.push("frame count must be positive".to_string());
        }
        if self.events == 0 {
            problems.push("event count must be positive".to_string());
        }
        if self.own_tokens == 0 || self.frames * self.own_tokens > self.slot_vocab {
            problems.push(format!(
                "need 0 < frames * own_tokens <= slot_vocab, got {} * {} vs {}",
                self.frames, self.own_tokens, self.slot_vocab
            ));
        }
        if !(0.0..=1.0).contains(&self.own_mass) {
            problems.push("own_mass must lie in [0, 1]".to_string());
        }
        if !(0.0..=1.0).contains(&self.self_loop) {
            problems.push("self_loop must lie in [0, 1]".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Row-stochastic transition matrix; collisions of the designated
    /// successors (tiny F) accumulate.
    pub fn transition(&self) -> Vec<Vec<f64>> {
        let f_dim = self.frames;
        let spread = (1.0 - self.self_loop) / 2.0;
        (0..f_dim)
            .map(|f| {
                let mut row = vec![0.0; f_dim];
                row[f] += self.self_loop;
                row[(f + 1) % f_dim] += spread;
                row[(f + 2) % f_dim] += spread;
                row
            })
            .collect()
    }

    pub fn initial(&self) -> Vec<f64> {
        vec![1.0 / self.frames as f64; self.frames]
    }

    /// Token distribution of any slot under frame `f` (the pattern is the
    /// same for all four slots; only the token names differ).
    pub fn slot_dist(&self, f: usize) -> Vec<f64> {
        let base = (1.0 - self.own_mass) / self.slot_vocab as f64;
        let mut p = vec![base; self.slot_vocab];
        let start = f * self.own_tokens;
        for t in &mut p[start..start + self.own_tokens] {
            *t += self.own_mass / self.own_tokens as f64;
        }
        p
    }

    pub fn token_name(slot: usize, index: usize) -> String {
        format!("{}{:02}", SLOT_PREFIXES[slot], index)
    }

    /// Inverse of [`Self::token_name`], bounded by the slot vocabulary.
    pub fn parse_token(&self, slot: usize, name: &str) -> Option<usize> {
        let index: usize = name.strip_prefix(SLOT_PREFIXES[slot])?.parse().ok()?;
        (index < self.slot_vocab).then_some(index)
    }

    pub fn frame_label(f: usize) -> String {
        format!("F{f:02}")
    }

    pub fn parse_frame(&self, label: &str) -> Option<usize> {
        let f: usize = label.strip_prefix('F')?.parse().ok()?;
        (f < self.frames).then_some(f)
    }
}

fn sample_cat(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    probs.len() - 1
}

/// Sample `n_docs` documents; every event records its gold frame label.
pub fn synth_generate(
    spec: &SyntheticSpec,
    n_docs: usize,
    rng: &mut impl Rng,
) -> Result<Vec<EventDocument>> {
    spec.validate()?;
    let transition = spec.transition();
    let initial = spec.initial();
    let dists: Vec<Vec<f64>> = (0..spec.frames).map(|f| spec.slot_dist(f)).collect();
    let mut docs = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let mut frames = Vec::with_capacity(spec.events);
        let mut tokens = Vec::with_capacity(spec.events * SLOTS_PER_EVENT);
        let mut f = sample_cat(&initial, rng);
        for m in 0..spec.events {
            if m > 0 {
                f = sample_cat(&transition[f], rng);
            }
            frames.push(Some(SyntheticSpec::frame_label(f)));
            for slot in 0..SLOTS_PER_EVENT {
                let idx = sample_cat(&dists[f], rng);
                tokens.push(SyntheticSpec::token_name(slot, idx));
            }
        }
        docs.push(EventDocument::new(frames, tokens));
    }
    Ok(docs)
}

fn emission(spec: &SyntheticSpec, dists: &[Vec<f64>], doc: &EventDocument, m: usize, f: usize) -> Result<f64> {
    let mut p = 1.0;
    for (slot, tok) in doc.event_tokens(m).iter().enumerate() {
        let idx = spec.parse_token(slot, tok).ok_or_else(|| {
            Error::Corpus(format!(
                "token {tok:?} in slot {slot} is outside the generator's support"
            ))
        })?;
        p *= dists[f][idx];
    }
    Ok(p)
}

/// Exact per-word perplexity of the corpus under its own generator: the
/// forward algorithm marginalizes the frame chain per document (with
/// per-step rescaling), and the summed log-likelihood is normalized by the
/// total token count.
pub fn hmm_oracle_ppl(spec: &SyntheticSpec, docs: &[EventDocument]) -> Result<f64> {
    spec.validate()?;
    assert!(!docs.is_empty(), "oracle needs at least one document");
    let transition = spec.transition();
    let initial = spec.initial();
    let dists: Vec<Vec<f64>> = (0..spec.frames).map(|f| spec.slot_dist(f)).collect();
    let mut log_lik = 0.0;
    let mut token_count = 0usize;
    for doc in docs {
        let mut alpha: Vec<f64> = (0..spec.frames)
            .map(|f| Ok(initial[f] * emission(spec, &dists, doc, 0, f)?))
            .collect::<Result<_>>()?;
        let scale: f64 = alpha.iter().sum();
        log_lik += scale.ln();
        alpha.iter_mut().for_each(|a| *a /= scale);
        for m in 1..doc.events() {
            let mut next = vec![0.0; spec.frames];
            for (f_prev, &a) in alpha.iter().enumerate() {
                for (f, &t) in transition[f_prev].iter().enumerate() {
                    next[f] += a * t;
                }
            }
            for (f, n) in next.iter_mut().enumerate() {
                *n *= emission(spec, &dists, doc, m, f)?;
            }
            let scale: f64 = next.iter().sum();
            log_lik += scale.ln();
            next.iter_mut().for_each(|a| *a /= scale);
            alpha = next;
        }
        token_count += doc.events() * SLOTS_PER_EVENT;
    }
    Ok((-log_lik / token_count as f64).exp())
}
