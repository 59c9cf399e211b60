//! Autoregressive language-model baselines and the supervised
//! frame-classification head. They share the differentiation core and the
//! recurrent building blocks with the main model but carry no latent frames.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::data::{BOS, SLOTS_PER_EVENT};
use crate::diffcore::{Graph, NodeId, ParameterSet};
use crate::error::{Error, Result};
use crate::rng::{substream, STREAM_INIT};
use crate::seqnets::{
    bigru_encode, init_weight, unigru_init_state, unigru_step, EmbeddingTable, GruStack,
};

pub const P_LM_EMB: &str = "lm.emb";
pub const P_LM_ROLE: &str = "lm.role";
pub const P_LM_GRU: &str = "lm.gru";
pub const P_LM_W_OUT: &str = "lm.w_out";

pub const P_CLS_EMB: &str = "cls.emb";
pub const P_CLS_GRU: &str = "cls.gru";
pub const P_CLS_W: &str = "cls.w";
pub const P_CLS_B: &str = "cls.b";

/// Left-to-right GRU language model, optionally with a learnable role
/// vector (verb, subject, object, modifier — cycling with position)
/// concatenated to every input embedding.
#[derive(Debug, Clone)]
pub struct Rnnlm {
    pub vocab: usize,
    pub embed_dim: usize,
    pub role_dim: Option<usize>,
    pub separators: bool,
    pub stack: GruStack,
    pub token_table: EmbeddingTable,
    pub role_table: Option<EmbeddingTable>,
    pub params: ParameterSet,
}

impl Rnnlm {
    /// Build and initialize. `with_roles` selects the role-augmented
    /// variant; it requires the plain four-token event layout, since the
    /// separator layout has no fifth role row.
    pub fn new(cfg: &Config, with_roles: bool) -> Result<Rnnlm> {
        cfg.validate()?;
        if with_roles && cfg.layout_tup {
            return Err(Error::Config(
                "the role-augmented language model needs data.layout_tup = false \
                 (separator positions have no role)"
                    .to_string(),
            ));
        }
        let role_dim = with_roles.then_some(cfg.role_dim);
        let input_size = cfg.embed_dim + role_dim.unwrap_or(0);
        let mut rng = substream(cfg.seed, STREAM_INIT, &[]);
        let token_table = EmbeddingTable::new(P_LM_EMB, cfg.vocab, cfg.embed_dim);
        let role_table =
            role_dim.map(|d| EmbeddingTable::new(P_LM_ROLE, SLOTS_PER_EVENT, d));
        let stack = GruStack::new(P_LM_GRU, cfg.dec_layers, input_size, cfg.dec_hidden, false);

        let mut params = ParameterSet::new();
        token_table.register(&mut params, &mut rng, cfg.embeddings_trainable);
        if let Some(table) = &role_table {
            table.register(&mut params, &mut rng, true);
        }
        stack.register(&mut params, &mut rng);
        params.add(
            P_LM_W_OUT,
            init_weight(&[cfg.vocab, cfg.dec_hidden], cfg.dec_hidden, &mut rng),
        );
        Ok(Rnnlm {
            vocab: cfg.vocab,
            embed_dim: cfg.embed_dim,
            role_dim,
            separators: cfg.layout_tup,
            stack,
            token_table,
            role_table,
            params,
        })
    }

    /// Input embedding for the token fed at step `t` of a teacher-forced
    /// pass: the begin marker before position 0, otherwise the previous
    /// gold token. The role vector follows the token's stream position;
    /// the begin marker carries a zero role.
    fn input_at(
        &self,
        g: &mut Graph,
        params: &ParameterSet,
        tokens: &[usize],
        t: usize,
    ) -> NodeId {
        let emb = if t == 0 {
            self.token_table.lookup(g, params, BOS)
        } else {
            self.token_table.lookup(g, params, tokens[t - 1])
        };
        match (&self.role_table, self.role_dim) {
            (Some(table), Some(d)) => {
                let role = if t == 0 {
                    g.constant(&[d], vec![0.0; d])
                } else {
                    table.lookup(g, params, (t - 1) % SLOTS_PER_EVENT)
                };
                g.concat(&[emb, role])
            }
            _ => emb,
        }
    }

    /// Total −Σ_t log p(w_t | w_<t) over the stream.
    pub fn nll(&self, g: &mut Graph, params: &ParameterSet, tokens: &[usize]) -> NodeId {
        assert!(!tokens.is_empty(), "language model scoring needs tokens");
        assert!(
            tokens.iter().all(|&t| t < self.vocab),
            "token id outside the vocabulary"
        );
        let mut states = unigru_init_state(g, &self.stack);
        let mut total: Option<NodeId> = None;
        for (t, &gold) in tokens.iter().enumerate() {
            let x = self.input_at(g, params, tokens, t);
            let h = unigru_step(g, params, &self.stack, x, &mut states);
            let logits = {
                let w = g.param(params, P_LM_W_OUT);
                g.matvec(w, h)
            };
            let lp = g.log_softmax(logits);
            let picked = g.pick(lp, gold);
            total = Some(match total {
                None => picked,
                Some(acc) => g.add(acc, picked),
            });
        }
        g.scale(total.unwrap(), -1.0)
    }
}

/// Supervised head for predicting one event's frame: a linear map over the
/// final states of a bidirectional GRU read of the event, through softplus,
/// with dropout on the logits during training.
#[derive(Debug, Clone)]
pub struct FrameClassifier {
    pub frames: usize,
    pub dropout: f64,
    pub stack: GruStack,
    pub token_table: EmbeddingTable,
    pub params: ParameterSet,
}

impl FrameClassifier {
    pub fn new(cfg: &Config) -> Result<FrameClassifier> {
        cfg.validate()?;
        let mut rng = substream(cfg.seed, STREAM_INIT, &[]);
        let token_table = EmbeddingTable::new(P_CLS_EMB, cfg.vocab, cfg.embed_dim);
        let stack = GruStack::new(P_CLS_GRU, cfg.enc_layers, cfg.embed_dim, cfg.enc_hidden, true);
        let width = stack.output_size();
        let mut params = ParameterSet::new();
        token_table.register(&mut params, &mut rng, cfg.embeddings_trainable);
        stack.register(&mut params, &mut rng);
        params.add(P_CLS_W, init_weight(&[cfg.frames, width], width, &mut rng));
        params.add(P_CLS_B, crate::diffcore::Tensor::zeros(&[cfg.frames]));
        Ok(FrameClassifier {
            frames: cfg.frames,
            dropout: cfg.dropout,
            stack,
            token_table,
            params,
        })
    }

    /// An inverted-dropout mask over the logits: kept entries are scaled by
    /// 1/(1−rate) so evaluation needs no rescaling.
    pub fn dropout_mask(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let keep = 1.0 - self.dropout;
        (0..self.frames)
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect()
    }

    /// Class logits for one event. `dropout_mask` is supplied only during
    /// training; evaluation omits it and the head is deterministic.
    pub fn logits(
        &self,
        g: &mut Graph,
        params: &ParameterSet,
        event_tokens: &[usize],
        dropout_mask: Option<&[f64]>,
    ) -> NodeId {
        assert_eq!(
            event_tokens.len(),
            SLOTS_PER_EVENT,
            "the classifier reads exactly one event"
        );
        let inputs: Vec<NodeId> = event_tokens
            .iter()
            .map(|&t| self.token_table.lookup(g, params, t))
            .collect();
        let rows = bigru_encode(g, params, &self.stack, &inputs);
        let hidden = self.stack.hidden_size;
        let fwd_final = g.slice(*rows.last().unwrap(), 0, hidden);
        let bwd_final = g.slice(rows[0], hidden, hidden);
        let h = g.concat(&[fwd_final, bwd_final]);
        let w = g.param(params, P_CLS_W);
        let b = g.param(params, P_CLS_B);
        let lin = g.matvec(w, h);
        let pre = g.add(lin, b);
        let act = g.softplus(pre);
        match dropout_mask {
            None => act,
            Some(mask) => {
                assert_eq!(mask.len(), self.frames);
                let m = g.constant_vec(mask);
                g.mul(act, m)
            }
        }
    }

    /// Cross-entropy of the gold frame under softmaxed logits.
    pub fn cross_entropy(&self, g: &mut Graph, logits: NodeId, gold: usize) -> NodeId {
        assert!(gold < self.frames, "gold frame out of range");
        let lp = g.log_softmax(logits);
        let picked = g.pick(lp, gold);
        g.scale(picked, -1.0)
    }
}
