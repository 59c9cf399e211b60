//! Acceptance gate: one test per shipped guarantee, ordered c01..c10.
//! Each prints a single PASS line with its measured evidence; failures
//! carry the numbers in the panic message. The trend tests (c05-c09)
//! train real models on the default synthetic corpus and share those
//! runs through lazily-initialized statics.

use std::sync::OnceLock;
use std::time::Instant;

use ssdvae::config::Config;
use ssdvae::data::{
    build_inc, hmm_oracle_ppl, parse_corpus, parse_inc, serialize_corpus, serialize_inc,
    synth_generate, EventDocument, SyntheticSpec, Vocabulary,
};
use ssdvae::diffcore::{finite_difference_check, Graph, OptimizerState};
use ssdvae::encoder::{inject_observation, ObservationMask};
use ssdvae::eval::{
    frame_classification_metrics, inc_accuracy, model_frame_predictions, perplexity,
};
use ssdvae::gumbel::{entropy, gumbel_noise, gumbel_softmax_sample};
use ssdvae::model::Model;
use ssdvae::rng::{substream, STREAM_GUMBEL, STREAM_INC, STREAM_SYNTH};
use ssdvae::trainer::{encode_corpus, fit, train_epoch, Checkpoint, TrainTarget};

use rand::Rng;

// ---------------------------------------------------------------------------
// c01: analytic gradients of the full objective match central differences.
// ---------------------------------------------------------------------------

#[test]
fn c01_objective_gradients_match_finite_differences() {
    let started = Instant::now();
    let mut cfg = Config::default();
    for (k, v) in [
        ("model.frames", "5"),
        ("model.vocab", "20"),
        ("model.events", "3"),
        ("model.embed_dim", "8"),
        ("model.enc_layers", "1"),
        ("model.enc_hidden", "8"),
        ("model.dec_layers", "1"),
        ("model.dec_hidden", "8"),
        ("train.seed", "41"),
    ] {
        cfg.set(k, v).unwrap();
    }
    let mut model = Model::new(&cfg).unwrap();
    // Audit at a generic parameter point: the uniform init keeps recurrent
    // states so close to zero that true reset-gate gradients sink below the
    // differencing noise floor.
    for name in ["emb.token", "emb.frame"] {
        let idx = model.params.index_of(name).unwrap();
        for x in model.params.at_mut(idx).1.data_mut() {
            *x *= 10.0;
        }
    }

    let mut rng = substream(41, STREAM_GUMBEL, &[0]);
    let tokens: Vec<usize> = (0..12).map(|_| rng.gen_range(4..20)).collect();
    let mask = ObservationMask::from_events(vec![None, Some(2), None]);
    let noise = model.draw_chain_noise(3, 1, &mut rng);

    let mut params = std::mem::replace(&mut model.params, ssdvae::diffcore::ParameterSet::new());
    let report = finite_difference_check(
        |g, p| model.document_terms(g, p, &tokens, &mask, &noise).total,
        &mut params,
        1e-5,
        1e-4,
    )
    .unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        report.passed(),
        "gradient audit failed:\n{report}"
    );
    assert!(elapsed < 60.0, "audit took {elapsed:.1}s, bound is 60s");
    println!(
        "PASS c01: every parameter gradient matches central differences \
         (max rel {:.2e}, {:.1}s)",
        report.max_relative_error, elapsed
    );
}

// ---------------------------------------------------------------------------
// c02: relaxed categorical samples are simplex points that preserve the
// noisy argmax, with entropy monotone in temperature.
// ---------------------------------------------------------------------------

#[test]
fn c02_relaxed_samples_live_on_the_simplex_with_monotone_entropy() {
    let started = Instant::now();
    let taus = [0.1, 0.5, 1.0, 5.0];
    let mut rng = substream(17, STREAM_GUMBEL, &[]);
    for draw in 0..10_000 {
        let n = 2 + draw % 9;
        let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let noise = gumbel_noise(n, &mut rng);
        let noisy_argmax = argmax(
            &logits
                .iter()
                .zip(&noise)
                .map(|(l, g)| l + g)
                .collect::<Vec<f64>>(),
        );
        let mut entropies = Vec::with_capacity(taus.len());
        for &tau in &taus {
            let sample = gumbel_softmax_sample(&logits, tau, &noise);
            let sum: f64 = sample.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "sum {sum} off the simplex");
            assert!(sample.iter().all(|&p| p > 0.0), "zero coordinate at draw {draw}");
            assert_eq!(argmax(&sample), noisy_argmax, "argmax moved at tau {tau}");
            entropies.push(entropy(&sample));
        }
        for pair in entropies.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-12,
                "entropy fell from {} to {} as tau rose (draw {draw})",
                pair[0],
                pair[1]
            );
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "simplex sweep took {elapsed:.1}s, bound is 60s");
    println!(
        "PASS c02: 10k relaxed draws sum to one, stay positive, keep the noisy \
         argmax, and sharpen as tau falls ({elapsed:.1}s)"
    );
}

// ---------------------------------------------------------------------------
// c03: at low temperature the relaxed argmax follows the categorical law.
// ---------------------------------------------------------------------------

#[test]
fn c03_low_temperature_argmax_frequencies_match_the_softmax_law() {
    let logits = [std::f64::consts::LN_2, 0.0, 0.0];
    let expected = [0.5, 0.25, 0.25];
    let mut rng = substream(23, STREAM_GUMBEL, &[]);
    let mut counts = [0usize; 3];
    let draws = 100_000;
    for _ in 0..draws {
        let noise = gumbel_noise(3, &mut rng);
        let sample = gumbel_softmax_sample(&logits, 0.1, &noise);
        counts[argmax(&sample)] += 1;
    }
    let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / draws as f64).collect();
    for (i, (&f, &e)) in freqs.iter().zip(&expected).enumerate() {
        assert!(
            (f - e).abs() <= 0.01,
            "coordinate {i}: frequency {f:.4} vs expected {e} (tolerance 0.01)"
        );
    }
    println!(
        "PASS c03: 100k argmax draws land at [{:.3}, {:.3}, {:.3}] against [0.5, 0.25, 0.25]",
        freqs[0], freqs[1], freqs[2]
    );
}

// ---------------------------------------------------------------------------
// c04: norm-scaled injection strictly boosts the observed frame without
// saturating any probability.
// ---------------------------------------------------------------------------

#[test]
fn c04_observation_injection_strictly_boosts_the_observed_frame() {
    let mut rng = substream(29, STREAM_GUMBEL, &[]);
    for trial in 0..1000 {
        let f = 2 + trial % 15;
        let mut gamma: Vec<f64> = (0..f).map(|_| rng.gen_range(-4.0..4.0)).collect();
        if gamma.iter().all(|&x| x == 0.0) {
            gamma[0] = 1.0;
        }
        let observed = rng.gen_range(0..f);

        let mut g = Graph::new();
        let raw = g.constant_vec(&gamma);
        let before = g.softmax(raw);
        let injected = inject_observation(&mut g, raw, Some(observed));
        let after = g.softmax(injected);
        let p_before = g.value(before)[observed];
        let p_after = g.value(after)[observed];
        assert!(
            p_after > p_before,
            "trial {trial}: observed probability {p_before} did not rise ({p_after})"
        );
        for &p in g.value(after) {
            assert!(p > 0.0 && p < 1.0, "trial {trial}: saturated probability {p}");
        }
    }
    println!(
        "PASS c04: 1k random logit vectors all boost the observed frame strictly, \
         saturating nothing"
    );
}

// ---------------------------------------------------------------------------
// Shared training harness for the trend tests (c05-c09).
// ---------------------------------------------------------------------------

const TREND_SEEDS: [u64; 3] = [11, 12, 13];
const CORPUS_SEED: u64 = 7;

fn reduced_dims(cfg: &mut Config) {
    for (k, v) in [
        ("model.frames", "16"),
        ("model.vocab", "300"),
        ("model.embed_dim", "16"),
        ("model.enc_layers", "1"),
        ("model.enc_hidden", "32"),
        ("model.dec_layers", "1"),
        ("model.dec_hidden", "32"),
        ("train.batch", "100"),
        ("train.patience", "6"),
        ("train.max_epochs", "80"),
    ] {
        cfg.set(k, v).unwrap();
    }
}

fn spec_of(cfg: &Config) -> SyntheticSpec {
    SyntheticSpec {
        frames: cfg.synth_frames,
        slot_vocab: cfg.synth_slot_vocab,
        events: cfg.synth_events,
        own_tokens: cfg.synth_own_tokens,
        own_mass: cfg.synth_own_mass,
        self_loop: cfg.synth_self_loop,
    }
}

struct Splits {
    train: Vec<EventDocument>,
    valid: Vec<EventDocument>,
    test: Vec<EventDocument>,
}

fn draw_splits(cfg: &Config) -> Splits {
    let spec = spec_of(cfg);
    let draw = |part: u64, count: usize| {
        let mut rng = substream(CORPUS_SEED, STREAM_SYNTH, &[part]);
        synth_generate(&spec, count, &mut rng).unwrap()
    };
    Splits {
        train: draw(0, cfg.synth_train_docs),
        valid: draw(1, cfg.synth_valid_docs),
        test: draw(2, cfg.synth_test_docs),
    }
}

/// Train one model and return its test perplexity.
fn train_and_score(cfg: &Config, splits: &Splits, vocab: &Vocabulary) -> f64 {
    let mut cfg = cfg.clone();
    cfg.set("model.vocab", &vocab.num_tokens().to_string()).unwrap();
    let mut target = TrainTarget::build(&cfg).unwrap();
    let train = encode_corpus(&splits.train, vocab, target.separators());
    let valid = encode_corpus(&splits.valid, vocab, target.separators());
    let (ckpt, _) = fit(&mut target, &train, &valid, &cfg, vocab).unwrap();
    let best = ckpt.rebuild().unwrap();
    let test = encode_corpus(&splits.test, vocab, best.separators());
    perplexity(&best.score_target().unwrap(), &test.streams, cfg.seed, cfg.eval_chains).unwrap()
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

struct TrendRuns {
    oracle: f64,
    eps00: Vec<f64>,
    eps05: Vec<f64>,
    eps09: Vec<f64>,
    rnnlm: Vec<f64>,
    concat09: Vec<f64>,
    seconds: f64,
}

static TREND: OnceLock<TrendRuns> = OnceLock::new();

fn trend_runs() -> &'static TrendRuns {
    TREND.get_or_init(|| {
        let started = Instant::now();
        let mut base = Config::default();
        reduced_dims(&mut base);
        let splits = draw_splits(&base);
        let oracle = hmm_oracle_ppl(&spec_of(&base), &splits.test).unwrap();
        let vocab = Vocabulary::build(&splits.train, base.vocab, base.frames);

        let arm = |kind: &str, eps: f64, attention: &str| -> Vec<f64> {
            TREND_SEEDS
                .iter()
                .map(|&seed| {
                    let mut cfg = base.clone();
                    cfg.set("model.kind", kind).unwrap();
                    cfg.set("model.attention", attention).unwrap();
                    cfg.set("train.epsilon", &eps.to_string()).unwrap();
                    cfg.set("train.seed", &seed.to_string()).unwrap();
                    train_and_score(&cfg, &splits, &vocab)
                })
                .collect()
        };
        let eps00 = arm("ssdvae", 0.0, "additive");
        let eps05 = arm("ssdvae", 0.5, "additive");
        let eps09 = arm("ssdvae", 0.9, "additive");
        let rnnlm = arm("rnnlm", 0.0, "additive");
        let concat09 = arm("ssdvae", 0.9, "concat");
        TrendRuns {
            oracle,
            eps00,
            eps05,
            eps09,
            rnnlm,
            concat09,
            seconds: started.elapsed().as_secs_f64(),
        }
    })
}

// ---------------------------------------------------------------------------
// c05: more frame supervision gives strictly better held-out perplexity,
// and even the unsupervised model beats the sequence baseline.
// ---------------------------------------------------------------------------

#[test]
fn c05_observation_rate_orders_test_perplexity() {
    let runs = trend_runs();
    let (m00, m05, m09, mlm) = (
        median(&runs.eps00),
        median(&runs.eps05),
        median(&runs.eps09),
        median(&runs.rnnlm),
    );
    assert!(
        runs.seconds < 3600.0,
        "trend training took {:.0}s, bound is 3600s",
        runs.seconds
    );
    assert!(
        m09 < m05 && m05 < m00 && m00 < mlm,
        "medians out of order: eps0.9 {m09:.3}, eps0.5 {m05:.3}, eps0.0 {m00:.3}, \
         rnnlm {mlm:.3} (per-seed eps0.9 {:?}, eps0.5 {:?}, eps0.0 {:?}, rnnlm {:?})",
        runs.eps09,
        runs.eps05,
        runs.eps00,
        runs.rnnlm
    );
    println!(
        "PASS c05: median test ppl falls with supervision: 0.9 -> {m09:.2} < 0.5 -> \
         {m05:.2} < 0.0 -> {m00:.2} < rnnlm {mlm:.2} ({:.0}s total)",
        runs.seconds
    );
}

// ---------------------------------------------------------------------------
// c06: learned models respect the generating-process bound, the
// well-supervised model comes close, and the bound itself is exact.
// ---------------------------------------------------------------------------

#[test]
fn c06_perplexities_respect_the_generating_process_bound() {
    // The closed-form corpus bound must agree with brute-force enumeration.
    let small = SyntheticSpec {
        frames: 3,
        slot_vocab: 9,
        events: 2,
        own_tokens: 3,
        own_mass: 0.8,
        self_loop: 0.6,
    };
    let mut rng = substream(3, STREAM_SYNTH, &[]);
    let docs = synth_generate(&small, 20, &mut rng).unwrap();
    let fast = hmm_oracle_ppl(&small, &docs).unwrap();
    let slow = enumerated_oracle_ppl(&small, &docs);
    assert!(
        (fast - slow).abs() < 1e-10,
        "forward algorithm {fast} vs enumeration {slow}"
    );

    let runs = trend_runs();
    let bound = 0.98 * runs.oracle;
    for (name, arm) in [
        ("eps0.0", &runs.eps00),
        ("eps0.5", &runs.eps05),
        ("eps0.9", &runs.eps09),
        ("rnnlm", &runs.rnnlm),
    ] {
        for &ppl in arm {
            assert!(
                ppl >= bound,
                "{name} reached ppl {ppl:.3}, below 0.98 x oracle {:.3}",
                runs.oracle
            );
        }
    }
    let m09 = median(&runs.eps09);
    assert!(
        m09 <= 1.5 * runs.oracle,
        "eps0.9 median {m09:.3} exceeds 1.5 x oracle {:.3}",
        runs.oracle
    );
    println!(
        "PASS c06: oracle {:.3} matches enumeration to 1e-10; every run stays above \
         0.98 x oracle and the 0.9 median {m09:.2} is within 1.5x",
        runs.oracle
    );
}

// ---------------------------------------------------------------------------
// c07: cloze discrimination beats the sequence baseline and clear chance.
// ---------------------------------------------------------------------------

struct IncRuns {
    model_acc: Vec<f64>,
    rnnlm_acc: Vec<f64>,
}

static INC: OnceLock<IncRuns> = OnceLock::new();

fn inc_runs() -> &'static IncRuns {
    INC.get_or_init(|| {
        let mut base = Config::default();
        reduced_dims(&mut base);
        base.set("synth.events", "6").unwrap();
        base.set("model.events", "6").unwrap();
        base.set("synth.train_docs", "2500").unwrap();
        base.set("synth.valid_docs", "300").unwrap();
        let splits = draw_splits(&base);
        let vocab = Vocabulary::build(&splits.train, base.vocab, base.frames);

        let mut inc_rng = substream(CORPUS_SEED, STREAM_INC, &[]);
        let samples = build_inc(&splits.test, 2000, &mut inc_rng).unwrap();

        let score = |kind: &str, eps: f64, seed: u64| -> f64 {
            let mut cfg = base.clone();
            cfg.set("model.kind", kind).unwrap();
            cfg.set("train.epsilon", &eps.to_string()).unwrap();
            cfg.set("train.seed", &seed.to_string()).unwrap();
            cfg.set("model.vocab", &vocab.num_tokens().to_string()).unwrap();
            let mut target = TrainTarget::build(&cfg).unwrap();
            let train = encode_corpus(&splits.train, &vocab, target.separators());
            let valid = encode_corpus(&splits.valid, &vocab, target.separators());
            let (ckpt, _) = fit(&mut target, &train, &valid, &cfg, &vocab).unwrap();
            let best = ckpt.rebuild().unwrap();
            inc_accuracy(
                &best.score_target().unwrap(),
                &samples,
                &vocab,
                cfg.seed,
                cfg.eval_chains,
            )
            .unwrap()
            .accuracy
        };
        IncRuns {
            model_acc: TREND_SEEDS.iter().map(|&s| score("ssdvae", 0.4, s)).collect(),
            rnnlm_acc: TREND_SEEDS.iter().map(|&s| score("rnnlm", 0.0, s)).collect(),
        }
    })
}

#[test]
fn c07_cloze_accuracy_beats_the_baseline_and_chance() {
    let runs = inc_runs();
    let m_model = median(&runs.model_acc);
    let m_lm = median(&runs.rnnlm_acc);
    let chance = 1.0 / 6.0;
    assert!(
        m_model >= m_lm,
        "frame model cloze accuracy {m_model:.4} below baseline {m_lm:.4} \
         (per-seed {:?} vs {:?})",
        runs.model_acc,
        runs.rnnlm_acc
    );
    assert!(
        m_model >= chance + 0.10 && m_lm >= chance + 0.10,
        "accuracies {m_model:.4} / {m_lm:.4} too close to chance {chance:.4}"
    );
    println!(
        "PASS c07: cloze accuracy {m_model:.3} (frame model) >= {m_lm:.3} (baseline), \
         both clear chance+0.10 = {:.3}",
        chance + 0.10
    );
}

// ---------------------------------------------------------------------------
// c08: frame supervision lifts single-event frame prediction by a wide
// margin.
// ---------------------------------------------------------------------------

#[test]
fn c08_supervision_rate_drives_frame_prediction_quality() {
    let mut base = Config::default();
    reduced_dims(&mut base);
    base.set("synth.events", "1").unwrap();
    base.set("model.events", "1").unwrap();
    base.set("synth.train_docs", "2000").unwrap();
    base.set("synth.valid_docs", "300").unwrap();
    let splits = draw_splits(&base);
    let vocab = Vocabulary::build(&splits.train, base.vocab, base.frames);

    let f1_of = |eps: f64, seed: u64| -> f64 {
        let mut cfg = base.clone();
        cfg.set("train.epsilon", &eps.to_string()).unwrap();
        cfg.set("train.seed", &seed.to_string()).unwrap();
        cfg.set("model.vocab", &vocab.num_tokens().to_string()).unwrap();
        let mut target = TrainTarget::build(&cfg).unwrap();
        let train = encode_corpus(&splits.train, &vocab, target.separators());
        let valid = encode_corpus(&splits.valid, &vocab, target.separators());
        let (ckpt, _) = fit(&mut target, &train, &valid, &cfg, &vocab).unwrap();
        let TrainTarget::SsdVae(best) = ckpt.rebuild().unwrap() else { unreachable!() };
        let test = encode_corpus(&splits.test, &vocab, best.separators);
        let mut events = Vec::new();
        let mut gold = Vec::new();
        for (i, frames) in test.frames.iter().enumerate() {
            if let Some(f) = frames[0] {
                events.push(test.streams[i].clone());
                gold.push(f);
            }
        }
        let preds = model_frame_predictions(&best, &events);
        frame_classification_metrics(&preds, &gold).macro_f1
    };

    let high: Vec<f64> = TREND_SEEDS.iter().map(|&s| f1_of(0.9, s)).collect();
    let low: Vec<f64> = TREND_SEEDS.iter().map(|&s| f1_of(0.2, s)).collect();
    let (m_high, m_low) = (median(&high), median(&low));
    assert!(
        m_high > m_low + 0.10,
        "macro F1 gap too small: eps0.9 {m_high:.4} vs eps0.2 {m_low:.4} \
         (per-seed {high:?} vs {low:?})"
    );
    println!(
        "PASS c08: single-event macro F1 rises from {m_low:.3} (eps 0.2) to {m_high:.3} \
         (eps 0.9), a gap over 0.10"
    );
}

// ---------------------------------------------------------------------------
// c09: additive attention at least matches the concatenation variant at
// high supervision (reported, not hard-failed, inside the noise band).
// ---------------------------------------------------------------------------

#[test]
fn c09_additive_attention_matches_or_beats_concatenation() {
    let runs = trend_runs();
    let m_add = median(&runs.eps09);
    let m_cat = median(&runs.concat09);
    if m_add <= m_cat {
        println!(
            "PASS c09: additive attention ppl {m_add:.3} <= concatenation {m_cat:.3}"
        );
    } else if m_add <= 1.02 * m_cat {
        println!(
            "PASS c09 (within noise): additive {m_add:.3} vs concatenation {m_cat:.3} \
             differ by under 2%"
        );
    } else {
        panic!(
            "additive attention ppl {m_add:.3} worse than concatenation {m_cat:.3} \
             by more than 2% (per-seed {:?} vs {:?})",
            runs.eps09, runs.concat09
        );
    }
}

// ---------------------------------------------------------------------------
// c10: bitwise determinism and exact round trips.
// ---------------------------------------------------------------------------

#[test]
fn c10_replays_and_round_trips_are_exact() {
    let mut cfg = Config::default();
    for (k, v) in [
        ("model.frames", "4"),
        ("model.vocab", "80"),
        ("model.events", "3"),
        ("model.embed_dim", "5"),
        ("model.enc_layers", "1"),
        ("model.enc_hidden", "4"),
        ("model.dec_layers", "1"),
        ("model.dec_hidden", "5"),
        ("train.batch", "8"),
        ("train.max_epochs", "3"),
        ("train.patience", "5"),
        ("train.epsilon", "0.5"),
        ("train.seed", "47"),
        ("synth.frames", "4"),
        ("synth.slot_vocab", "12"),
        ("synth.events", "3"),
        ("synth.own_tokens", "3"),
        ("synth.train_docs", "40"),
        ("synth.valid_docs", "10"),
        ("synth.test_docs", "10"),
    ] {
        cfg.set(k, v).unwrap();
    }
    let splits = draw_splits(&cfg);
    let vocab = Vocabulary::build(&splits.train, cfg.vocab, cfg.frames);
    cfg.set("model.vocab", &vocab.num_tokens().to_string()).unwrap();

    // Identical seeds reproduce the whole training log bitwise (wall-clock
    // column aside) and the checkpoint bytes.
    let dir = tempfile::tempdir().unwrap();
    let run = |path: &std::path::Path| -> Vec<String> {
        let mut target = TrainTarget::build(&cfg).unwrap();
        let train = encode_corpus(&splits.train, &vocab, target.separators());
        let valid = encode_corpus(&splits.valid, &vocab, target.separators());
        let (ckpt, logs) = fit(&mut target, &train, &valid, &cfg, &vocab).unwrap();
        ckpt.save(path).unwrap();
        logs.iter()
            .map(|l| l.line().rsplit_once('\t').unwrap().0.to_string())
            .collect()
    };
    let log_a = run(&dir.path().join("a.ckpt"));
    let log_b = run(&dir.path().join("b.ckpt"));
    assert_eq!(log_a, log_b, "training logs diverged under identical seeds");
    let bytes_a = std::fs::read(dir.path().join("a.ckpt")).unwrap();
    let bytes_b = std::fs::read(dir.path().join("b.ckpt")).unwrap();
    assert_eq!(bytes_a, bytes_b, "checkpoints diverged under identical seeds");

    // Checkpoint save -> load -> save is byte-identical.
    let loaded = Checkpoint::load(&dir.path().join("a.ckpt")).unwrap();
    loaded.save(&dir.path().join("c.ckpt")).unwrap();
    assert_eq!(
        bytes_a,
        std::fs::read(dir.path().join("c.ckpt")).unwrap(),
        "checkpoint round trip changed bytes"
    );

    // Corpus and cloze serialization round-trip byte-for-byte.
    let corpus_path = dir.path().join("corpus.txt");
    serialize_corpus(&splits.train, &corpus_path).unwrap();
    let reread = parse_corpus(&corpus_path).unwrap();
    assert!(reread.diagnostics.is_empty());
    let again = dir.path().join("corpus2.txt");
    serialize_corpus(&reread.documents, &again).unwrap();
    assert_eq!(
        std::fs::read(&corpus_path).unwrap(),
        std::fs::read(&again).unwrap(),
        "corpus round trip changed bytes"
    );

    let six = SyntheticSpec {
        frames: 4,
        slot_vocab: 12,
        events: 6,
        own_tokens: 3,
        own_mass: 0.8,
        self_loop: 0.6,
    };
    let mut rng = substream(47, STREAM_SYNTH, &[9]);
    let six_docs = synth_generate(&six, 12, &mut rng).unwrap();
    let mut inc_rng = substream(47, STREAM_INC, &[]);
    let cloze = build_inc(&six_docs, 6, &mut inc_rng).unwrap();
    let cloze_path = dir.path().join("cloze.txt");
    serialize_inc(&cloze, &cloze_path).unwrap();
    let cloze_read = parse_inc(&cloze_path).unwrap();
    assert!(cloze_read.diagnostics.is_empty());
    let cloze_again = dir.path().join("cloze2.txt");
    serialize_inc(&cloze_read.samples, &cloze_again).unwrap();
    assert_eq!(
        std::fs::read(&cloze_path).unwrap(),
        std::fs::read(&cloze_again).unwrap(),
        "cloze round trip changed bytes"
    );

    // Evaluation never mutates parameters: bit-compare before and after.
    let target = loaded.rebuild().unwrap();
    let test = encode_corpus(&splits.test, &vocab, target.separators());
    let snapshot: Vec<Vec<u64>> = target
        .params()
        .iter()
        .map(|(_, t)| t.data().iter().map(|x| x.to_bits()).collect())
        .collect();
    let ppl1 = perplexity(&target.score_target().unwrap(), &test.streams, 47, 2).unwrap();
    let ppl2 = perplexity(&target.score_target().unwrap(), &test.streams, 47, 2).unwrap();
    assert_eq!(ppl1.to_bits(), ppl2.to_bits(), "repeat evaluation drifted");
    let after: Vec<Vec<u64>> = target
        .params()
        .iter()
        .map(|(_, t)| t.data().iter().map(|x| x.to_bits()).collect())
        .collect();
    assert_eq!(snapshot, after, "evaluation mutated parameters");

    // Training epochs consume optimizer state deterministically even when
    // resumed from a reloaded checkpoint.
    let mut resumed = loaded.rebuild().unwrap();
    let mut opt = OptimizerState::from_parts(
        loaded.opt.step,
        loaded.opt.learning_rate,
        loaded.opt.moments().0.to_vec(),
        loaded.opt.moments().1.to_vec(),
    );
    let train = encode_corpus(&splits.train, &vocab, resumed.separators());
    let s1 = train_epoch(&mut resumed, &mut opt, &train, &cfg, 99).unwrap();
    let mut resumed2 = loaded.rebuild().unwrap();
    let mut opt2 = OptimizerState::from_parts(
        loaded.opt.step,
        loaded.opt.learning_rate,
        loaded.opt.moments().0.to_vec(),
        loaded.opt.moments().1.to_vec(),
    );
    let s2 = train_epoch(&mut resumed2, &mut opt2, &train, &cfg, 99).unwrap();
    assert_eq!(s1, s2, "resumed epochs diverged");

    println!(
        "PASS c10: identical seeds replay logs and checkpoints bitwise; corpus, \
         cloze, and checkpoint files round-trip exactly; evaluation leaves \
         parameters untouched"
    );
}

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Brute-force corpus perplexity under the generating process: sum the joint
/// over every frame sequence explicitly.
fn enumerated_oracle_ppl(spec: &SyntheticSpec, docs: &[EventDocument]) -> f64 {
    let transition = spec.transition();
    let initial = spec.initial();
    let dists: Vec<Vec<f64>> = (0..spec.frames).map(|f| spec.slot_dist(f)).collect();
    let mut log_lik = 0.0;
    let mut tokens = 0usize;
    for doc in docs {
        let m = doc.events();
        let mut total = 0.0f64;
        let mut chain = vec![0usize; m];
        loop {
            // P(frames) * P(tokens | frames) for this complete assignment.
            let mut p = initial[chain[0]];
            for w in chain.windows(2) {
                p *= transition[w[0]][w[1]];
            }
            for (e, &f) in chain.iter().enumerate() {
                for (slot, tok) in doc.event_tokens(e).iter().enumerate() {
                    let idx = spec.parse_token(slot, tok).unwrap();
                    p *= dists[f][idx];
                }
            }
            total += p;
            // Odometer increment over frame assignments.
            let mut pos = 0;
            loop {
                if pos == m {
                    break;
                }
                chain[pos] += 1;
                if chain[pos] < spec.frames {
                    break;
                }
                chain[pos] = 0;
                pos += 1;
            }
            if pos == m {
                break;
            }
        }
        log_lik += total.ln();
        tokens += doc.tokens().len();
    }
    (-log_lik / tokens as f64).exp()
}
