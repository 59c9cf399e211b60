//! Token reconstruction p(w_t | w_<t, f_{1..M}): a unidirectional GRU over
//! the gold prefix (teacher forcing, BOS first) whose state attends over the
//! per-event frame embeddings before the vocabulary projection.

use crate::diffcore::{Graph, NodeId, ParameterSet};
use crate::encoder::attend;
use crate::seqnets::{unigru_init_state, unigru_step, EmbeddingTable, GruStack};

/// Parameter names and fixed settings of the decoder head. `w_cat` is
/// present only for the concatenative attention variant.
#[derive(Debug, Clone)]
pub struct DecoderSpec<'a> {
    pub w_in: &'a str,
    pub w_out: &'a str,
    pub w_cat: Option<&'a str>,
    pub bos: usize,
}

/// One predicted position: the vocabulary logits and, when a gold token was
/// given, its log-probability under those logits.
#[derive(Debug, Clone, Copy)]
pub struct TokenPrediction {
    pub logits: NodeId,
    pub log_prob: Option<NodeId>,
}

/// Stack the soft frame embeddings f_m^T E^F into the M x d_e matrix the
/// decoder attends over.
pub fn frame_context(
    g: &mut Graph,
    params: &ParameterSet,
    frame_table: &EmbeddingTable,
    samples: &[NodeId],
) -> NodeId {
    assert!(!samples.is_empty(), "frame context needs at least one event");
    let rows: Vec<NodeId> = samples
        .iter()
        .map(|&f| frame_table.weighted(g, params, f))
        .collect();
    g.stack_rows(&rows)
}

/// Vocabulary logits from the current decoder state `z` and the frame
/// matrix `e_m`.
pub fn decode_logits(
    g: &mut Graph,
    params: &ParameterSet,
    spec: &DecoderSpec<'_>,
    e_m: NodeId,
    z: NodeId,
) -> NodeId {
    let w_in = g.param(params, spec.w_in);
    let proj = g.matvec(w_in, z);
    let context = attend(g, e_m, proj);
    let combined = match spec.w_cat {
        None => {
            let tp = g.tanh(proj);
            let tc = g.tanh(context);
            g.add(tp, tc)
        }
        Some(w_cat) => {
            let w_cat = g.param(params, w_cat);
            let cat = g.concat(&[proj, context]);
            let mixed = g.matvec(w_cat, cat);
            g.tanh(mixed)
        }
    };
    let w_out = g.param(params, spec.w_out);
    g.matvec(w_out, combined)
}

/// Feed one token, advance the GRU stack in place, and score the next
/// position. `gold` picks that token's log-probability out of the logits.
#[allow(clippy::too_many_arguments)]
pub fn decode_step(
    g: &mut Graph,
    params: &ParameterSet,
    spec: &DecoderSpec<'_>,
    stack: &GruStack,
    token_table: &EmbeddingTable,
    input_token: usize,
    gold: Option<usize>,
    states: &mut [NodeId],
    e_m: NodeId,
) -> TokenPrediction {
    let x = token_table.lookup(g, params, input_token);
    let z = unigru_step(g, params, stack, x, states);
    let logits = decode_logits(g, params, spec, e_m, z);
    let log_prob = gold.map(|k| {
        let lp = g.log_softmax(logits);
        g.pick(lp, k)
    });
    TokenPrediction { logits, log_prob }
}

/// Score a full gold sequence under teacher forcing: position t consumes
/// BOS (t = 1) or the gold token at t-1, and picks the gold token at t.
/// The decoder state starts at zero.
pub fn decode_sequence_teacher_forced(
    g: &mut Graph,
    params: &ParameterSet,
    spec: &DecoderSpec<'_>,
    stack: &GruStack,
    token_table: &EmbeddingTable,
    e_m: NodeId,
    gold_tokens: &[usize],
) -> Vec<TokenPrediction> {
    let mut states = unigru_init_state(g, stack);
    let mut out = Vec::with_capacity(gold_tokens.len());
    for (t, &gold) in gold_tokens.iter().enumerate() {
        let input = if t == 0 { spec.bos } else { gold_tokens[t - 1] };
        let pred = decode_step(
            g,
            params,
            spec,
            stack,
            token_table,
            input,
            Some(gold),
            &mut states,
            e_m,
        );
        out.push(pred);
    }
    out
}

/// Frame-to-token soft-clustering scores W_out * tanh(E^M^T), shape V x M.
pub fn beta_dec(g: &mut Graph, params: &ParameterSet, w_out: &str, e_m: NodeId) -> NodeId {
    let w = g.param(params, w_out);
    let et = g.transpose(e_m);
    let te = g.tanh(et);
    g.matmul(w, te)
}
