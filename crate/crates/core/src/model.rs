//! The assembled model: parameter registry, the encode-decode pipeline for
//! one document, multi-chain objective averaging, and free-running script
//! generation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{AttentionKind, Config};
use crate::data::{BOS, SLOTS_PER_EVENT, TUP, UNK};
use crate::decoder::{
    decode_sequence_teacher_forced, decode_step, frame_context, DecoderSpec,
};
use crate::diffcore::{Graph, NodeId, ParameterSet};
use crate::encoder::{
    encode_event_step, encode_frame_chain, EncoderSpec, FrameState, ObservationMask,
};
use crate::error::{Error, Result};
use crate::gumbel::gumbel_noise;
use crate::objective::{document_objective, LossTerms};
use crate::rng::{substream, STREAM_INIT};
use crate::seqnets::{bigru_encode, init_weight, unigru_init_state, EmbeddingTable, GruStack};

pub const P_TOKEN_EMB: &str = "emb.token";
pub const P_FRAME_EMB: &str = "emb.frame";
pub const P_ENC_GRU: &str = "enc.gru";
pub const P_ENC_W_IN: &str = "enc.w_in";
pub const P_ENC_W_OUT: &str = "enc.w_out";
pub const P_ENC_W_CAT: &str = "enc.w_cat";
pub const P_DEC_GRU: &str = "dec.gru";
pub const P_DEC_W_IN: &str = "dec.w_in";
pub const P_DEC_W_OUT: &str = "dec.w_out";
pub const P_DEC_W_CAT: &str = "dec.w_cat";

/// Plain-number view of one document's loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub reconstruction: f64,
    pub entropy: f64,
    pub classification: f64,
    pub token_count: usize,
}

/// Model dimensions plus the weights. Graph-building methods take the
/// parameter set explicitly so gradient checks and optimizers can evaluate
/// the same function over perturbed weights.
#[derive(Debug, Clone)]
pub struct Model {
    pub frames: usize,
    pub vocab: usize,
    pub embed_dim: usize,
    pub tau: f64,
    pub alpha_q: f64,
    pub alpha_c: f64,
    pub samples: usize,
    pub attention: AttentionKind,
    pub separators: bool,
    pub enc_stack: GruStack,
    pub dec_stack: GruStack,
    pub token_table: EmbeddingTable,
    pub frame_table: EmbeddingTable,
    pub params: ParameterSet,
}

impl Model {
    /// Build and initialize all weights from the config's init stream.
    pub fn new(cfg: &Config) -> Result<Model> {
        cfg.validate()?;
        let mut rng = substream(cfg.seed, STREAM_INIT, &[]);
        let token_table = EmbeddingTable::new(P_TOKEN_EMB, cfg.vocab, cfg.embed_dim);
        let frame_table = EmbeddingTable::new(P_FRAME_EMB, cfg.frames, cfg.embed_dim);
        let enc_stack = GruStack::new(P_ENC_GRU, cfg.enc_layers, cfg.embed_dim, cfg.enc_hidden, true);
        let dec_stack = GruStack::new(P_DEC_GRU, cfg.dec_layers, cfg.embed_dim, cfg.dec_hidden, false);
        let enc_width = enc_stack.output_size();

        let mut params = ParameterSet::new();
        token_table.register(&mut params, &mut rng, cfg.embeddings_trainable);
        frame_table.register(&mut params, &mut rng, cfg.embeddings_trainable);
        enc_stack.register(&mut params, &mut rng);
        params.add(
            P_ENC_W_IN,
            init_weight(&[enc_width, cfg.embed_dim], cfg.embed_dim, &mut rng),
        );
        params.add(
            P_ENC_W_OUT,
            init_weight(&[cfg.frames, enc_width], enc_width, &mut rng),
        );
        if cfg.attention == AttentionKind::Concat {
            params.add(
                P_ENC_W_CAT,
                init_weight(&[enc_width, 2 * enc_width], 2 * enc_width, &mut rng),
            );
        }
        dec_stack.register(&mut params, &mut rng);
        params.add(
            P_DEC_W_IN,
            init_weight(&[cfg.embed_dim, cfg.dec_hidden], cfg.dec_hidden, &mut rng),
        );
        params.add(
            P_DEC_W_OUT,
            init_weight(&[cfg.vocab, cfg.embed_dim], cfg.embed_dim, &mut rng),
        );
        if cfg.attention == AttentionKind::Concat {
            params.add(
                P_DEC_W_CAT,
                init_weight(&[cfg.embed_dim, 2 * cfg.embed_dim], 2 * cfg.embed_dim, &mut rng),
            );
        }

        Ok(Model {
            frames: cfg.frames,
            vocab: cfg.vocab,
            embed_dim: cfg.embed_dim,
            tau: cfg.temperature,
            alpha_q: cfg.alpha_q,
            alpha_c: cfg.alpha_c,
            samples: cfg.samples,
            attention: cfg.attention,
            separators: cfg.layout_tup,
            enc_stack,
            dec_stack,
            token_table,
            frame_table,
            params,
        })
    }

    pub fn encoder_spec(&self) -> EncoderSpec<'_> {
        EncoderSpec {
            w_in: P_ENC_W_IN,
            w_out: P_ENC_W_OUT,
            w_cat: (self.attention == AttentionKind::Concat).then_some(P_ENC_W_CAT),
            frame_table: &self.frame_table,
            tau: self.tau,
        }
    }

    pub fn decoder_spec(&self) -> DecoderSpec<'static> {
        DecoderSpec {
            w_in: P_DEC_W_IN,
            w_out: P_DEC_W_OUT,
            w_cat: (self.attention == AttentionKind::Concat).then_some(P_DEC_W_CAT),
            bos: BOS,
        }
    }

    /// Tokens per event under the configured layout.
    pub fn tokens_per_event(&self) -> usize {
        SLOTS_PER_EVENT + usize::from(self.separators)
    }

    /// Embed the token stream and run the bidirectional stack; returns H.
    pub fn encode_h(&self, g: &mut Graph, params: &ParameterSet, tokens: &[usize]) -> NodeId {
        let inputs: Vec<NodeId> = tokens
            .iter()
            .map(|&t| self.token_table.lookup(g, params, t))
            .collect();
        let rows = bigru_encode(g, params, &self.enc_stack, &inputs);
        g.stack_rows(&rows)
    }

    /// One sampled chain: encode, decode teacher-forced, assemble J.
    pub fn chain_terms(
        &self,
        g: &mut Graph,
        params: &ParameterSet,
        tokens: &[usize],
        mask: &ObservationMask,
        noise: &[Vec<f64>],
    ) -> (LossTerms, Vec<FrameState>) {
        assert_eq!(
            tokens.len(),
            mask.len() * self.tokens_per_event(),
            "token stream length does not match the event count"
        );
        let h = self.encode_h(g, params, tokens);
        let spec = self.encoder_spec();
        let states = encode_frame_chain(g, params, &spec, h, mask, noise);
        let samples: Vec<NodeId> = states.iter().map(|s| s.sample).collect();
        let e_m = frame_context(g, params, &self.frame_table, &samples);
        let preds = decode_sequence_teacher_forced(
            g,
            params,
            &self.decoder_spec(),
            &self.dec_stack,
            &self.token_table,
            e_m,
            tokens,
        );
        let terms = document_objective(g, &preds, &states, mask, self.alpha_q, self.alpha_c);
        (terms, states)
    }

    /// Average the loss terms over S sampled chains.
    pub fn document_terms(
        &self,
        g: &mut Graph,
        params: &ParameterSet,
        tokens: &[usize],
        mask: &ObservationMask,
        chains: &[Vec<Vec<f64>>],
    ) -> LossTerms {
        assert!(!chains.is_empty(), "need at least one sampled chain");
        let per: Vec<LossTerms> = chains
            .iter()
            .map(|noise| self.chain_terms(g, params, tokens, mask, noise).0)
            .collect();
        if per.len() == 1 {
            return per[0];
        }
        let scale = 1.0 / per.len() as f64;
        let mut avg = |pick: fn(&LossTerms) -> NodeId| {
            let mut acc = pick(&per[0]);
            for t in &per[1..] {
                acc = g.add(acc, pick(t));
            }
            g.scale(acc, scale)
        };
        LossTerms {
            reconstruction: avg(|t| t.reconstruction),
            entropy: avg(|t| t.entropy),
            classification: avg(|t| t.classification),
            total: avg(|t| t.total),
        }
    }

    /// Gumbel noise for `chains` sampled chains over `events` events.
    pub fn draw_chain_noise(
        &self,
        events: usize,
        chains: usize,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Vec<Vec<f64>>> {
        (0..chains)
            .map(|_| (0..events).map(|_| gumbel_noise(self.frames, rng)).collect())
            .collect()
    }

    /// Read the loss scalars out of an evaluated graph.
    pub fn breakdown(g: &Graph, terms: &LossTerms, token_count: usize) -> LossBreakdown {
        LossBreakdown {
            total: g.value(terms.total)[0],
            reconstruction: g.value(terms.reconstruction)[0],
            entropy: g.value(terms.entropy)[0],
            classification: g.value(terms.classification)[0],
            token_count,
        }
    }

    /// Continue a seed event for `num_events` further events. Each step
    /// re-encodes the full prefix, extends the frame chain by one hard
    /// draw, then samples the event's tokens from the decoder (rejecting
    /// reserved tokens, 100 redraws, then the best allowed token).
    /// `temperature = 0` is greedy and deterministic.
    pub fn generate_script(
        &self,
        params: &ParameterSet,
        seed_event: [usize; SLOTS_PER_EVENT],
        num_events: usize,
        temperature: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<(usize, [usize; SLOTS_PER_EVENT])>> {
        if num_events < 1 {
            return Err(Error::Eval("generation needs num_events >= 1".to_string()));
        }
        if temperature < 0.0 || !temperature.is_finite() {
            return Err(Error::Eval("temperature must be finite and >= 0".to_string()));
        }
        if seed_event.iter().any(|&t| t >= self.vocab) {
            return Err(Error::Eval("seed token outside the vocabulary".to_string()));
        }
        let mut stream: Vec<usize> = seed_event.to_vec();
        if self.separators {
            stream.push(TUP);
        }
        let mut hard_frames: Vec<usize> = Vec::new();
        let mut script = Vec::with_capacity(num_events);
        let enc_spec = self.encoder_spec();
        let dec_spec = self.decoder_spec();
        let zero_noise = vec![0.0; self.frames];

        for _ in 0..num_events {
            let mut g = Graph::new();
            let h = self.encode_h(&mut g, params, &stream);

            // Assign the seed event's frame once, then one draw per new event.
            while hard_frames.len() < stream.len() / self.tokens_per_event() {
                let f_prev = match hard_frames.last() {
                    None => {
                        g.constant(&[self.frames], vec![1.0 / self.frames as f64; self.frames])
                    }
                    Some(&f) => {
                        let mut one_hot = vec![0.0; self.frames];
                        one_hot[f] = 1.0;
                        g.constant_vec(&one_hot)
                    }
                };
                let state =
                    encode_event_step(&mut g, params, &enc_spec, f_prev, None, h, &zero_noise);
                let gamma = g.value(state.gamma).to_vec();
                hard_frames.push(draw_index(&gamma, temperature, None, rng));
            }
            // The upcoming event's frame, conditioned on the last choice.
            let mut one_hot = vec![0.0; self.frames];
            one_hot[*hard_frames.last().unwrap()] = 1.0;
            let f_prev = g.constant_vec(&one_hot);
            let state = encode_event_step(&mut g, params, &enc_spec, f_prev, None, h, &zero_noise);
            let gamma = g.value(state.gamma).to_vec();
            let new_frame = draw_index(&gamma, temperature, None, rng);
            hard_frames.push(new_frame);

            // Frame matrix over all chosen frames, then advance the decoder
            // over the existing stream and sample the new event.
            let frame_rows: Vec<NodeId> = hard_frames
                .iter()
                .map(|&f| self.frame_table.lookup(&mut g, params, f))
                .collect();
            let e_m = g.stack_rows(&frame_rows);
            let mut states = unigru_init_state(&mut g, &self.dec_stack);
            let mut last = None;
            for t in 0..=stream.len() {
                let input = if t == 0 { BOS } else { stream[t - 1] };
                let pred = decode_step(
                    &mut g,
                    params,
                    &dec_spec,
                    &self.dec_stack,
                    &self.token_table,
                    input,
                    None,
                    &mut states,
                    e_m,
                );
                last = Some(pred);
            }
            let mut event = [0usize; SLOTS_PER_EVENT];
            for slot in event.iter_mut() {
                let logits = g.value(last.unwrap().logits).to_vec();
                let tok = draw_token(&logits, temperature, rng);
                *slot = tok;
                stream.push(tok);
                let pred = decode_step(
                    &mut g,
                    params,
                    &dec_spec,
                    &self.dec_stack,
                    &self.token_table,
                    tok,
                    None,
                    &mut states,
                    e_m,
                );
                last = Some(pred);
            }
            if self.separators {
                stream.push(TUP);
            }
            script.push((new_frame, event));
        }
        Ok(script)
    }
}

/// Softmax sampling with temperature; `t = 0` is argmax. `forbidden`
/// restricts the argmax fallback as well as the draws.
fn draw_index(
    logits: &[f64],
    temperature: f64,
    forbidden: Option<&[usize]>,
    rng: &mut ChaCha8Rng,
) -> usize {
    let allowed = |i: usize| forbidden.map_or(true, |f| !f.contains(&i));
    let argmax = || {
        (0..logits.len())
            .filter(|&i| allowed(i))
            .max_by(|&a, &b| logits[a].partial_cmp(&logits[b]).unwrap())
            .expect("no allowed index")
    };
    if temperature == 0.0 {
        return argmax();
    }
    let max = logits
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|&l| ((l - max) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    for _ in 0..100 {
        let mut u: f64 = rng.gen::<f64>() * total;
        let mut choice = logits.len() - 1;
        for (i, &w) in weights.iter().enumerate() {
            if u < w {
                choice = i;
                break;
            }
            u -= w;
        }
        if allowed(choice) {
            return choice;
        }
    }
    argmax()
}

/// Token draw: the unknown, begin-of-sequence, and separator tokens are
/// rejected and redrawn; after 100 rejections the best allowed token wins.
fn draw_token(logits: &[f64], temperature: f64, rng: &mut ChaCha8Rng) -> usize {
    draw_index(logits, temperature, Some(&[UNK, BOS, TUP]), rng)
}
