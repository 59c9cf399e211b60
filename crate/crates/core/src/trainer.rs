//! The training loop: batched optimization with per-epoch mask redraws,
//! early stopping on validation perplexity, and checksummed checkpoints
//! that round-trip bitwise.

use std::io::Read as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use crate::baselines::{FrameClassifier, Rnnlm};
use crate::config::{Config, ModelKind};
use crate::data::{mask_frames, EventDocument, Vocabulary, SLOTS_PER_EVENT};
use crate::diffcore::{
    backward_gradients, clip_global_norm, Gradients, Graph, OptimizerState, ParameterSet,
};
use crate::encoder::ObservationMask;
use crate::error::{Error, Result};
use crate::eval::{perplexity, ScoreTarget};
use crate::model::Model;
use crate::rng::{substream, STREAM_DROPOUT, STREAM_GUMBEL, STREAM_MASK, STREAM_SHUFFLE};

/// Any of the trainable models, behind one loop.
#[derive(Debug, Clone)]
pub enum TrainTarget {
    SsdVae(Model),
    Lm(Rnnlm),
    Classifier(FrameClassifier),
}

impl TrainTarget {
    /// Construct the model the config asks for, freshly initialized.
    pub fn build(cfg: &Config) -> Result<TrainTarget> {
        Ok(match cfg.kind {
            ModelKind::SsdVae => TrainTarget::SsdVae(Model::new(cfg)?),
            ModelKind::Rnnlm => TrainTarget::Lm(Rnnlm::new(cfg, false)?),
            ModelKind::RnnlmRole => TrainTarget::Lm(Rnnlm::new(cfg, true)?),
            ModelKind::Classifier => TrainTarget::Classifier(FrameClassifier::new(cfg)?),
        })
    }

    pub fn params(&self) -> &ParameterSet {
        match self {
            TrainTarget::SsdVae(m) => &m.params,
            TrainTarget::Lm(m) => &m.params,
            TrainTarget::Classifier(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        match self {
            TrainTarget::SsdVae(m) => &mut m.params,
            TrainTarget::Lm(m) => &mut m.params,
            TrainTarget::Classifier(m) => &mut m.params,
        }
    }

    pub fn separators(&self) -> bool {
        match self {
            TrainTarget::SsdVae(m) => m.separators,
            TrainTarget::Lm(m) => m.separators,
            TrainTarget::Classifier(_) => false,
        }
    }

    /// The NLL scorer for perplexity-style evaluation, when one exists.
    pub fn score_target(&self) -> Option<ScoreTarget<'_>> {
        match self {
            TrainTarget::SsdVae(m) => Some(ScoreTarget::Frames(m)),
            TrainTarget::Lm(m) => Some(ScoreTarget::Plain(m)),
            TrainTarget::Classifier(_) => None,
        }
    }

    /// Overwrite token-embedding rows from a pretrained text file. Only
    /// exact vocabulary matches are loaded; returns how many rows were.
    pub fn load_embeddings(&mut self, path: &Path, vocab: &Vocabulary) -> Result<usize> {
        let resolve = |tok: &str| {
            let id = vocab.token_id(tok);
            (vocab.token_str(id) == tok).then_some(id)
        };
        let (table, params) = match self {
            TrainTarget::SsdVae(m) => (m.token_table.clone(), &mut m.params),
            TrainTarget::Lm(m) => (m.token_table.clone(), &mut m.params),
            TrainTarget::Classifier(m) => (m.token_table.clone(), &mut m.params),
        };
        table.load_pretrained(params, path, resolve)
    }
}

/// A corpus bound to one vocabulary and layout, ready for the loop.
#[derive(Debug, Clone)]
pub struct EncodedCorpus {
    pub streams: Vec<Vec<usize>>,
    pub frames: Vec<Vec<Option<usize>>>,
    pub unknown_frames: usize,
}

pub fn encode_corpus(
    docs: &[EventDocument],
    vocab: &Vocabulary,
    separators: bool,
) -> EncodedCorpus {
    let mut streams = Vec::with_capacity(docs.len());
    let mut frames = Vec::with_capacity(docs.len());
    let mut unknown = 0;
    for doc in docs {
        streams.push(vocab.encode_tokens(doc, separators));
        let (f, u) = vocab.encode_frames(doc);
        frames.push(f);
        unknown += u;
    }
    EncodedCorpus { streams, frames, unknown_frames: unknown }
}

/// Aggregates over one pass of the training corpus. The loss means are per
/// document; the gradient norms are measured per batch before clipping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_j: f64,
    pub mean_lw: f64,
    pub mean_lq: f64,
    pub mean_lc: f64,
    pub grad_norm_mean: f64,
    pub grad_norm_max: f64,
    pub documents: usize,
}

/// One pass over the corpus: per batch, redraw nothing (masks are drawn per
/// epoch), build each document's loss, average gradients, clip, and step.
pub fn train_epoch(
    target: &mut TrainTarget,
    opt: &mut OptimizerState,
    corpus: &EncodedCorpus,
    cfg: &Config,
    epoch: u64,
) -> Result<EpochStats> {
    let usable: Vec<usize> = match target {
        TrainTarget::Classifier(_) => (0..corpus.streams.len())
            .filter(|&i| corpus.frames[i].len() == 1 && corpus.frames[i][0].is_some())
            .collect(),
        _ => (0..corpus.streams.len()).collect(),
    };
    if usable.is_empty() {
        return Err(Error::Corpus(
            "no trainable documents (the classifier needs single-event documents \
             with frame labels)"
                .to_string(),
        ));
    }

    // Masks are drawn in corpus order from the (seed, epoch) stream so the
    // document-mask pairing is independent of shuffling.
    let masks: Vec<ObservationMask> = if matches!(target, TrainTarget::SsdVae(_)) {
        let mask_epoch = if cfg.mask_fixed { 0 } else { epoch };
        let mut mask_rng = substream(cfg.seed, STREAM_MASK, &[mask_epoch]);
        corpus
            .frames
            .iter()
            .map(|f| mask_frames(f, cfg.epsilon, &mut mask_rng))
            .collect()
    } else {
        Vec::new()
    };

    let mut order = usable;
    if cfg.shuffle {
        let mut shuffle_rng = substream(cfg.seed, STREAM_SHUFFLE, &[epoch]);
        order.shuffle(&mut shuffle_rng);
    }
    let mut gumbel_rng = substream(cfg.seed, STREAM_GUMBEL, &[epoch]);
    let mut dropout_rng = substream(cfg.seed, STREAM_DROPOUT, &[epoch]);

    let mut sums = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut norm_sum = 0.0f64;
    let mut norm_max = 0.0f64;
    let mut batches = 0usize;

    for (batch_idx, batch) in order.chunks(cfg.batch.max(1)).enumerate() {
        let mut grads = Gradients::zeros_like(target.params());
        for &doc in batch {
            let tokens = &corpus.streams[doc];
            let mut g = Graph::new();
            let (loss, j, lw, lq, lc) = match target {
                TrainTarget::SsdVae(m) => {
                    let chains =
                        m.draw_chain_noise(masks[doc].len(), m.samples, &mut gumbel_rng);
                    let terms =
                        m.document_terms(&mut g, &m.params, tokens, &masks[doc], &chains);
                    let b = Model::breakdown(&g, &terms, tokens.len());
                    (terms.total, b.total, b.reconstruction, b.entropy, b.classification)
                }
                TrainTarget::Lm(m) => {
                    let nll = m.nll(&mut g, &m.params, tokens);
                    let v = g.value(nll)[0];
                    (nll, v, v, 0.0, 0.0)
                }
                TrainTarget::Classifier(m) => {
                    let mask = m.dropout_mask(&mut dropout_rng);
                    let event = &tokens[..SLOTS_PER_EVENT];
                    let logits = m.logits(&mut g, &m.params, event, Some(&mask));
                    let gold = corpus.frames[doc][0].expect("filtered above");
                    let ce = m.cross_entropy(&mut g, logits, gold);
                    let v = g.value(ce)[0];
                    (ce, v, v, 0.0, 0.0)
                }
            };
            if !j.is_finite() {
                return Err(Error::TrainAbort {
                    epoch: epoch as usize,
                    batch: batch_idx,
                    message: format!("non-finite loss {j} on document {doc}"),
                });
            }
            sums.0 += j;
            sums.1 += lw;
            sums.2 += lq;
            sums.3 += lc;
            let doc_grads = backward_gradients(&g, loss, target.params())?;
            grads.add_assign(&doc_grads);
        }
        grads.scale(1.0 / batch.len() as f64);
        let pre_clip = clip_global_norm(&mut grads, cfg.clip);
        debug_assert!(
            cfg.clip <= 0.0 || grads.global_norm() <= cfg.clip + 1e-9,
            "clipping bound violated"
        );
        norm_sum += pre_clip;
        norm_max = norm_max.max(pre_clip);
        batches += 1;
        opt.adam_step(target.params_mut(), &grads);
    }

    let n = order.len() as f64;
    Ok(EpochStats {
        mean_j: sums.0 / n,
        mean_lw: sums.1 / n,
        mean_lq: sums.2 / n,
        mean_lc: sums.3 / n,
        grad_norm_mean: norm_sum / batches as f64,
        grad_norm_max: norm_max,
        documents: order.len(),
    })
}

/// One training-log row. `line()` renders the on-disk format.
#[derive(Debug, Clone)]
pub struct EpochLog {
    pub epoch: u64,
    pub stats: EpochStats,
    pub val_ppl: f64,
    pub seconds: f64,
}

impl EpochLog {
    /// TAB-separated: epoch, mean J, mean L_w, mean L_q, mean L_c,
    /// validation perplexity, wall-clock seconds.
    pub fn line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.3}",
            self.epoch,
            self.stats.mean_j,
            self.stats.mean_lw,
            self.stats.mean_lq,
            self.stats.mean_lc,
            self.val_ppl,
            self.seconds
        )
    }
}

/// Validation metric: perplexity for the generative models (frames never
/// observed), exponentiated mean cross-entropy for the classifier.
fn validation_metric(
    target: &TrainTarget,
    valid: &EncodedCorpus,
    cfg: &Config,
) -> Result<f64> {
    match target.score_target() {
        Some(score) => perplexity(&score, &valid.streams, cfg.seed, cfg.eval_chains),
        None => {
            let TrainTarget::Classifier(m) = target else { unreachable!() };
            let mut total = 0.0;
            let mut count = 0usize;
            for (i, tokens) in valid.streams.iter().enumerate() {
                if valid.frames[i].len() != 1 {
                    continue;
                }
                let Some(gold) = valid.frames[i][0] else { continue };
                let mut g = Graph::new();
                let logits = m.logits(&mut g, &m.params, &tokens[..SLOTS_PER_EVENT], None);
                let ce = m.cross_entropy(&mut g, logits, gold);
                total += g.value(ce)[0];
                count += 1;
            }
            if count == 0 {
                return Err(Error::Eval(
                    "no labeled validation documents for the classifier".to_string(),
                ));
            }
            Ok((total / count as f64).exp())
        }
    }
}

/// Train with early stopping and return the best checkpoint plus the log.
/// Stopping rule: after `max(patience, 1)` consecutive epochs without a
/// strict validation improvement, or at the epoch cap.
pub fn fit(
    target: &mut TrainTarget,
    train: &EncodedCorpus,
    valid: &EncodedCorpus,
    cfg: &Config,
    vocab: &Vocabulary,
) -> Result<(Checkpoint, Vec<EpochLog>)> {
    cfg.validate()?;
    if train.streams.is_empty() || valid.streams.is_empty() {
        return Err(Error::Corpus("training needs non-empty corpora".to_string()));
    }
    let mut opt = OptimizerState::new(target.params(), cfg.learning_rate);
    let mut logs = Vec::new();
    let mut best: Option<(f64, ParameterSet, OptimizerState, u64)> = None;
    let mut streak = 0usize;
    let threshold = cfg.patience.max(1);

    for epoch in 1..=cfg.max_epochs as u64 {
        let started = Instant::now();
        let stats = train_epoch(target, &mut opt, train, cfg, epoch)?;
        let val_ppl = validation_metric(target, valid, cfg)?;
        logs.push(EpochLog {
            epoch,
            stats,
            val_ppl,
            seconds: started.elapsed().as_secs_f64(),
        });
        let improved = best.as_ref().map_or(true, |(b, ..)| val_ppl < *b);
        if improved {
            best = Some((val_ppl, target.params().clone(), opt.clone(), epoch));
            streak = 0;
        } else {
            streak += 1;
            if streak >= threshold {
                break;
            }
        }
    }
    let (best_val_ppl, params, opt, epoch) = best.expect("at least one epoch ran");
    let checkpoint = Checkpoint {
        config: cfg.clone(),
        vocab: vocab.clone(),
        params,
        opt,
        epoch,
        best_val_ppl,
    };
    Ok((checkpoint, logs))
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SSDVCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to resume or evaluate a training run.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: Config,
    pub vocab: Vocabulary,
    pub params: ParameterSet,
    pub opt: OptimizerState,
    pub epoch: u64,
    pub best_val_ppl: f64,
}

struct PayloadWriter {
    buf: Vec<u8>,
}

impl PayloadWriter {
    fn new() -> Self {
        PayloadWriter { buf: Vec::new() }
    }

    fn u64(&mut self, x: u64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    fn f64(&mut self, x: f64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.buf.extend_from_slice(b);
    }

    fn f64_slice(&mut self, xs: &[f64]) {
        self.u64(xs.len() as u64);
        for &x in xs {
            self.f64(x);
        }
    }
}

struct PayloadReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> PayloadReader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        PayloadReader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("truncated payload".to_string()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u64()? as usize;
        self.take(n)
    }

    fn string(&mut self) -> Result<String> {
        String::from_utf8(self.bytes()?.to_vec())
            .map_err(|_| Error::Checkpoint("invalid utf-8 in payload".to_string()))
    }

    fn f64_vec(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    fn done(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Checkpoint(format!(
                "{} unread trailing bytes in payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

impl Checkpoint {
    fn payload(&self) -> Vec<u8> {
        let mut w = PayloadWriter::new();
        w.bytes(self.config.to_text().as_bytes());
        w.u64(self.vocab.tokens().len() as u64);
        for t in self.vocab.tokens() {
            w.bytes(t.as_bytes());
        }
        w.u64(self.vocab.frame_labels().len() as u64);
        for f in self.vocab.frame_labels() {
            w.bytes(f.as_bytes());
        }
        w.u64(self.params.len() as u64);
        for (name, tensor) in self.params.iter() {
            w.bytes(name.as_bytes());
            w.u64(tensor.shape().len() as u64);
            for &d in tensor.shape() {
                w.u64(d as u64);
            }
            w.buf.push(u8::from(tensor.requires_grad()));
            w.f64_slice(tensor.data());
        }
        w.u64(self.opt.step);
        w.f64(self.opt.learning_rate);
        let (m, v) = self.opt.moments();
        w.u64(m.len() as u64);
        for (mb, vb) in m.iter().zip(v) {
            w.f64_slice(mb);
            w.f64_slice(vb);
        }
        w.u64(self.epoch);
        w.f64(self.best_val_ppl);
        w.buf
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let payload = self.payload();
        let digest = Sha256::digest(&payload);
        let mut out = Vec::with_capacity(payload.len() + 52);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&digest);
        out.extend_from_slice(&payload);
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let mut raw = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut raw)?;
        if raw.len() < 52 || &raw[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!(
                "{} is not a checkpoint file",
                path.display()
            )));
        }
        let version = u32::from_le_bytes(raw[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version} (this build reads \
                 {CHECKPOINT_VERSION})"
            )));
        }
        let payload_len = u64::from_le_bytes(raw[12..20].try_into().unwrap()) as usize;
        let stored_digest = &raw[20..52];
        let payload = &raw[52..];
        if payload.len() != payload_len {
            return Err(Error::Checkpoint(format!(
                "payload length {} does not match header {payload_len}",
                payload.len()
            )));
        }
        let digest = Sha256::digest(payload);
        if digest.as_slice() != stored_digest {
            return Err(Error::Checkpoint(
                "checksum mismatch: the file is corrupt".to_string(),
            ));
        }

        let mut r = PayloadReader::new(payload);
        let config_text = r.string()?;
        let mut config = Config::default();
        config.load_text(&config_text, "checkpoint")?;

        let n_tokens = r.u64()? as usize;
        let mut tokens = Vec::with_capacity(n_tokens);
        for _ in 0..n_tokens {
            tokens.push(r.string()?);
        }
        let n_frames = r.u64()? as usize;
        let mut frames = Vec::with_capacity(n_frames);
        for _ in 0..n_frames {
            frames.push(r.string()?);
        }
        let vocab = Vocabulary::from_parts(tokens, frames);

        let n_params = r.u64()? as usize;
        let mut params = ParameterSet::new();
        for _ in 0..n_params {
            let name = r.string()?;
            let rank = r.u64()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let requires_grad = r.take(1)?[0] != 0;
            let data = r.f64_vec()?;
            if data.len() != shape.iter().product::<usize>() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name} data does not match its shape"
                )));
            }
            let mut tensor = crate::diffcore::Tensor::from_vec(&shape, data);
            tensor.set_requires_grad(requires_grad);
            params.add(&name, tensor);
        }

        let step = r.u64()?;
        let lr = r.f64()?;
        let n_moments = r.u64()? as usize;
        if n_moments != n_params {
            return Err(Error::Checkpoint(
                "optimizer state does not match the parameter table".to_string(),
            ));
        }
        let mut m = Vec::with_capacity(n_moments);
        let mut v = Vec::with_capacity(n_moments);
        for _ in 0..n_moments {
            m.push(r.f64_vec()?);
            v.push(r.f64_vec()?);
        }
        let opt = OptimizerState::from_parts(step, lr, m, v);

        let epoch = r.u64()?;
        let best_val_ppl = r.f64()?;
        r.done()?;

        Ok(Checkpoint { config, vocab, params, opt, epoch, best_val_ppl })
    }

    /// Rebuild the runnable model carrying this checkpoint's weights.
    pub fn rebuild(&self) -> Result<TrainTarget> {
        if self.config.vocab != self.vocab.num_tokens() {
            return Err(Error::Checkpoint(format!(
                "config vocabulary size {} does not match the stored vocabulary ({})",
                self.config.vocab,
                self.vocab.num_tokens()
            )));
        }
        let mut target = TrainTarget::build(&self.config)?;
        {
            let fresh = target.params_mut();
            if fresh.len() != self.params.len() {
                return Err(Error::Checkpoint(
                    "stored parameters do not match the configured architecture".to_string(),
                ));
            }
            for i in 0..fresh.len() {
                let (stored_name, stored) = self.params.at(i);
                let (name, tensor) = fresh.at_mut(i);
                if name != stored_name || tensor.shape() != stored.shape() {
                    return Err(Error::Checkpoint(format!(
                        "stored parameter {stored_name} does not match {name} in the \
                         configured architecture"
                    )));
                }
                tensor.data_mut().copy_from_slice(stored.data());
                tensor.set_requires_grad(stored.requires_grad());
            }
        }
        Ok(target)
    }
}
