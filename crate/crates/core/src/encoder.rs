//! The variational frame chain q(f_m | f_{m-1}, I_m, w): attention from the
//! previous frame's embedding over the bi-GRU token states, an additive (or
//! concatenative) tanh combination projected to frame logits, norm-scaled
//! injection of observed frames, and the relaxed categorical draw.

use crate::diffcore::{Graph, NodeId, ParameterSet};
use crate::gumbel::gumbel_softmax_node;
use crate::seqnets::{bigru_encode, EmbeddingTable, GruStack};

/// Per-event frame observations: one-hot (a frame index) or all-zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask {
    observed: Vec<Option<usize>>,
}

impl ObservationMask {
    pub fn all_unobserved(events: usize) -> Self {
        ObservationMask {
            observed: vec![None; events],
        }
    }

    pub fn from_events(observed: Vec<Option<usize>>) -> Self {
        ObservationMask { observed }
    }

    /// Validate raw per-event vectors: each must be all-zero or exactly
    /// one-hot. Anything else is a contract violation.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let observed = rows
            .iter()
            .map(|row| {
                let hot: Vec<usize> = (0..row.len()).filter(|&i| row[i] != 0.0).collect();
                match hot.as_slice() {
                    [] => None,
                    [k] if row[*k] == 1.0 => Some(*k),
                    _ => panic!("observation row is neither zero nor one-hot: {row:?}"),
                }
            })
            .collect();
        ObservationMask { observed }
    }

    pub fn event(&self, m: usize) -> Option<usize> {
        self.observed[m]
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|o| o.is_some()).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = Option<usize>> + '_ {
        self.observed.iter().copied()
    }
}

/// One inferred frame: post-injection logits, the relaxed sample consumed
/// by the decoder, and softmax of the logits used by the loss terms.
#[derive(Debug, Clone, Copy)]
pub struct FrameState {
    pub gamma: NodeId,
    pub sample: NodeId,
    pub normalized: NodeId,
}

/// Parameter names and fixed settings of the encoder head. `w_cat` is
/// present only for the concatenative attention variant.
#[derive(Debug, Clone)]
pub struct EncoderSpec<'a> {
    pub w_in: &'a str,
    pub w_out: &'a str,
    pub w_cat: Option<&'a str>,
    pub frame_table: &'a EmbeddingTable,
    pub tau: f64,
}

/// Soft attention shared by encoder and decoder: scores = rows * query,
/// weights = softmax(scores), context = weights^T * rows.
pub fn attend(g: &mut Graph, rows: NodeId, query: NodeId) -> NodeId {
    let scores = g.matvec(rows, query);
    let weights = g.softmax(scores);
    g.vecmat(weights, rows)
}

/// Add ||gamma'||_2 at the observed index. With nothing observed, or when
/// the logits have zero norm, this is the identity.
pub fn inject_observation(g: &mut Graph, gamma_prime: NodeId, observed: Option<usize>) -> NodeId {
    let Some(k) = observed else {
        return gamma_prime;
    };
    let f_dim = g.shape(gamma_prime)[0];
    assert!(k < f_dim, "observed frame {k} out of range for {f_dim} frames");
    let norm = g.l2norm(gamma_prime);
    let mut onehot = vec![0.0; f_dim];
    onehot[k] = 1.0;
    let direction = g.constant_vec(&onehot);
    let bump = g.scalar_mul(norm, direction);
    g.add(gamma_prime, bump)
}

/// One step of the frame chain over precomputed token states `h` (T x d_h).
pub fn encode_event_step(
    g: &mut Graph,
    params: &ParameterSet,
    spec: &EncoderSpec<'_>,
    f_prev: NodeId,
    observed: Option<usize>,
    h: NodeId,
    noise: &[f64],
) -> FrameState {
    assert_eq!(
        noise.len(),
        spec.frame_table.rows,
        "noise length must equal the frame count"
    );
    let e_prev = spec.frame_table.weighted(g, params, f_prev);
    let w_in = g.param(params, spec.w_in);
    let query = g.matvec(w_in, e_prev);
    let context = attend(g, h, query);
    let combined = match spec.w_cat {
        None => {
            let tq = g.tanh(query);
            let tc = g.tanh(context);
            g.add(tq, tc)
        }
        Some(w_cat) => {
            let w_cat = g.param(params, w_cat);
            let cat = g.concat(&[query, context]);
            let mixed = g.matvec(w_cat, cat);
            g.tanh(mixed)
        }
    };
    let w_out = g.param(params, spec.w_out);
    let gamma_prime = g.matvec(w_out, combined);
    let gamma = inject_observation(g, gamma_prime, observed);
    let sample = gumbel_softmax_node(g, gamma, spec.tau, noise);
    let normalized = g.softmax(gamma);
    FrameState {
        gamma,
        sample,
        normalized,
    }
}

/// Embed the token stream, run the bidirectional stack once, then chain
/// [`encode_event_step`] over all events starting from the uniform simplex.
/// Returns the stacked token states H alongside the frame states.
pub fn encode_sequence(
    g: &mut Graph,
    params: &ParameterSet,
    spec: &EncoderSpec<'_>,
    stack: &GruStack,
    token_table: &EmbeddingTable,
    tokens: &[usize],
    mask: &ObservationMask,
    noise: &[Vec<f64>],
) -> (NodeId, Vec<FrameState>) {
    assert!(!tokens.is_empty(), "cannot encode an empty token stream");
    assert_eq!(mask.len(), noise.len(), "mask/noise event counts differ");
    let inputs: Vec<NodeId> = tokens
        .iter()
        .map(|&t| token_table.lookup(g, params, t))
        .collect();
    let rows = bigru_encode(g, params, stack, &inputs);
    let h = g.stack_rows(&rows);
    let states = encode_frame_chain(g, params, spec, h, mask, noise);
    (h, states)
}

/// The frame chain alone, for callers that already have H.
pub fn encode_frame_chain(
    g: &mut Graph,
    params: &ParameterSet,
    spec: &EncoderSpec<'_>,
    h: NodeId,
    mask: &ObservationMask,
    noise: &[Vec<f64>],
) -> Vec<FrameState> {
    let f_dim = spec.frame_table.rows;
    let mut f_prev = g.constant(&[f_dim], vec![1.0 / f_dim as f64; f_dim]);
    let mut states = Vec::with_capacity(mask.len());
    for m in 0..mask.len() {
        let state = encode_event_step(g, params, spec, f_prev, mask.event(m), h, &noise[m]);
        f_prev = state.sample;
        states.push(state);
    }
    states
}

/// Token-to-frame soft-clustering scores W_out * tanh(H^T), shape F x T.
pub fn beta_enc(g: &mut Graph, params: &ParameterSet, w_out: &str, h: NodeId) -> NodeId {
    let w = g.param(params, w_out);
    let ht = g.transpose(h);
    let th = g.tanh(ht);
    g.matmul(w, th)
}
