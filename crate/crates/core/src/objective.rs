//! The training objective J = L_w - alpha_q * L_q + alpha_c * L_c built
//! from decoder predictions and frame states. The uniform frame prior makes
//! the KL term an entropy plus a constant, so only the entropy appears; the
//! dropped constant shifts J without touching any gradient.

use crate::decoder::TokenPrediction;
use crate::diffcore::{Graph, NodeId};
use crate::encoder::{FrameState, ObservationMask};

/// All four scalars of one document's objective.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub reconstruction: NodeId,
    pub entropy: NodeId,
    pub classification: NodeId,
    pub total: NodeId,
}

/// Negative log-likelihood of the gold tokens: -sum_t log p(w_t | ...).
pub fn reconstruction_loss(g: &mut Graph, preds: &[TokenPrediction]) -> NodeId {
    let mut nll = g.constant_scalar(0.0);
    for p in preds {
        let lp = p
            .log_prob
            .expect("reconstruction loss needs gold-scored predictions");
        nll = g.sub(nll, lp);
    }
    nll
}

/// Sum over events of the entropy of softmax(gamma_m); lies in [0, M ln F].
pub fn entropy_regularizer(g: &mut Graph, states: &[FrameState]) -> NodeId {
    let mut h = g.constant_scalar(0.0);
    for s in states {
        let lp = g.log_softmax(s.gamma);
        let plogp = g.dot(s.normalized, lp);
        h = g.sub(h, plogp);
    }
    h
}

/// Sum over observed events of -log softmax(gamma_m)[k_m]. Zero when
/// nothing is observed.
pub fn classification_loss(
    g: &mut Graph,
    states: &[FrameState],
    mask: &ObservationMask,
) -> NodeId {
    assert_eq!(states.len(), mask.len(), "state/mask event counts differ");
    let mut loss = g.constant_scalar(0.0);
    for (s, observed) in states.iter().zip(mask.iter()) {
        if let Some(k) = observed {
            let lp = g.log_softmax(s.gamma);
            let picked = g.pick(lp, k);
            loss = g.sub(loss, picked);
        }
    }
    loss
}

/// J = L_w - alpha_q * L_q + alpha_c * L_c. The entropy term is *subtracted*:
/// under the uniform prior the KL turns into a negated entropy, so minimizing
/// J rewards high-entropy frame posteriors.
pub fn total_loss(
    g: &mut Graph,
    reconstruction: NodeId,
    entropy: NodeId,
    classification: NodeId,
    alpha_q: f64,
    alpha_c: f64,
) -> NodeId {
    assert!(alpha_q >= 0.0, "alpha_q must be non-negative");
    assert!(alpha_c >= 0.0, "alpha_c must be non-negative");
    let eq = g.scale(entropy, alpha_q);
    let ec = g.scale(classification, alpha_c);
    let a = g.sub(reconstruction, eq);
    g.add(a, ec)
}

/// Assemble all terms of one document's objective.
pub fn document_objective(
    g: &mut Graph,
    preds: &[TokenPrediction],
    states: &[FrameState],
    mask: &ObservationMask,
    alpha_q: f64,
    alpha_c: f64,
) -> LossTerms {
    let reconstruction = reconstruction_loss(g, preds);
    let entropy = entropy_regularizer(g, states);
    let classification = classification_loss(g, states, mask);
    let total = total_loss(g, reconstruction, entropy, classification, alpha_q, alpha_c);
    LossTerms {
        reconstruction,
        entropy,
        classification,
        total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::{backward_gradients, ParameterSet, Tensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state_from_logits(g: &mut Graph, logits: &[f64]) -> FrameState {
        let gamma = g.constant_vec(logits);
        let normalized = g.softmax(gamma);
        FrameState {
            gamma,
            sample: normalized,
            normalized,
        }
    }

    #[test]
    fn uniform_posteriors_hit_the_entropy_ceiling() {
        // M = 2 events, F = 4 frames, flat logits: L_q = 2 ln 4.
        let mut g = Graph::new();
        let states = [
            state_from_logits(&mut g, &[0.0; 4]),
            state_from_logits(&mut g, &[0.0; 4]),
        ];
        let lq = entropy_regularizer(&mut g, &states);
        let got = g.value(lq)[0];
        assert!((got - 2.0 * 4f64.ln()).abs() < 1e-12);
        assert!((got - 2.7726).abs() < 5e-5);
    }

    #[test]
    fn peaked_posterior_entropy_matches_the_closed_form() {
        let mut g = Graph::new();
        let states = [state_from_logits(&mut g, &[10.0, 0.0, 0.0, 0.0])];
        let lq = entropy_regularizer(&mut g, &states);
        let got = g.value(lq)[0];
        // Exact: p0 = e^10/(e^10+3); H = -p0 ln p0 - 3 p ln p.
        let p0 = 10f64.exp() / (10f64.exp() + 3.0);
        let p = 1.0 / (10f64.exp() + 3.0);
        let want = -p0 * p0.ln() - 3.0 * p * p.ln();
        assert!((got - want).abs() < 1e-14);
        assert!((got - 1.50e-3).abs() < 2e-6);
    }

    #[test]
    fn classification_charges_the_observed_frame() {
        let mut g = Graph::new();
        let states = [
            state_from_logits(&mut g, &[0.0; 4]),
            state_from_logits(&mut g, &[2.0, 0.0, 0.0, 0.0]),
        ];
        // Only the first event observed, uniform posterior: ln 4.
        let mask = ObservationMask::from_events(vec![Some(3), None]);
        let lc = classification_loss(&mut g, &states, &mask);
        assert!((g.value(lc)[0] - 4f64.ln()).abs() < 1e-12);
        assert!((g.value(lc)[0] - 1.3863).abs() < 5e-5);

        // Second event observed at its peaked index: ln(1 + 3 e^-2).
        let mask = ObservationMask::from_events(vec![None, Some(0)]);
        let lc = classification_loss(&mut g, &states, &mask);
        let want = (1.0 + 3.0 * (-2f64).exp()).ln();
        assert!((g.value(lc)[0] - want).abs() < 1e-12);
        assert!((g.value(lc)[0] - 0.3407).abs() < 1e-4);

        // Nothing observed: exactly zero.
        let mask = ObservationMask::all_unobserved(2);
        let lc = classification_loss(&mut g, &states, &mask);
        assert_eq!(g.value(lc)[0], 0.0);
    }

    #[test]
    fn the_worked_total_combines_all_three_terms() {
        // L_w = 4 ln 10, L_q = 2 ln 4, L_c = ln 4, alphas 0.1:
        // J = 9.2103 - 0.2773 + 0.1386 = 9.0717.
        let mut g = Graph::new();
        let lw = g.constant_scalar(4.0 * 10f64.ln());
        let lq = g.constant_scalar(2.0 * 4f64.ln());
        let lc = g.constant_scalar(4f64.ln());
        let j = total_loss(&mut g, lw, lq, lc, 0.1, 0.1);
        let want = 4.0 * 10f64.ln() - 0.1 * 2.0 * 4f64.ln() + 0.1 * 4f64.ln();
        assert!((g.value(j)[0] - want).abs() < 1e-12);
        assert!((g.value(j)[0] - 9.0717).abs() < 5e-5);
    }

    #[test]
    fn entropy_stays_inside_its_analytic_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let f = rng.gen_range(2..9);
            let m = rng.gen_range(1..5);
            let mut g = Graph::new();
            let states: Vec<FrameState> = (0..m)
                .map(|_| {
                    let logits: Vec<f64> =
                        (0..f).map(|_| rng.gen_range(-8.0..8.0)).collect();
                    state_from_logits(&mut g, &logits)
                })
                .collect();
            let lq = entropy_regularizer(&mut g, &states);
            let v = g.value(lq)[0];
            assert!(v >= 0.0, "entropy went negative: {v}");
            assert!(
                v <= m as f64 * (f as f64).ln() + 1e-12,
                "entropy exceeded M ln F: {v}"
            );
        }
    }

    #[test]
    fn restoring_the_dropped_prior_constant_shifts_j_but_not_gradients() {
        // Build a differentiable toy J from a parameter, then rebuild with
        // the constant M ln F added to the entropy term. The totals differ
        // by exactly alpha_q * M ln F and the gradients are bitwise equal.
        let (m, f) = (2usize, 5usize);
        let (alpha_q, alpha_c) = (0.1, 0.1);
        let mut ps = ParameterSet::new();
        ps.add(
            "logits",
            Tensor::from_vec(&[m * f], (0..m * f).map(|i| (i as f64 * 0.7).sin()).collect()),
        );
        let build = |g: &mut Graph, ps: &ParameterSet, add_const: bool| {
            let flat = g.param(ps, "logits");
            let states: Vec<FrameState> = (0..m)
                .map(|i| {
                    let row_matrix = g.constant(
                        &[f, m * f],
                        {
                            let mut d = vec![0.0; f * m * f];
                            for r in 0..f {
                                d[r * m * f + i * f + r] = 1.0;
                            }
                            d
                        },
                    );
                    let gamma = g.matvec(row_matrix, flat);
                    let normalized = g.softmax(gamma);
                    FrameState {
                        gamma,
                        sample: normalized,
                        normalized,
                    }
                })
                .collect();
            let mut lq = entropy_regularizer(g, &states);
            if add_const {
                let c = g.constant_scalar(m as f64 * (f as f64).ln());
                lq = g.add(lq, c);
            }
            let mask = ObservationMask::from_events(vec![Some(1), None]);
            let lc = classification_loss(g, &states, &mask);
            let lw = g.constant_scalar(3.0);
            total_loss(g, lw, lq, lc, alpha_q, alpha_c)
        };
        let mut g1 = Graph::new();
        let j1 = build(&mut g1, &ps, false);
        let mut g2 = Graph::new();
        let j2 = build(&mut g2, &ps, true);
        // Adding the constant to L_q lowers J by alpha_q * M ln F.
        let shift = g1.value(j1)[0] - g2.value(j2)[0];
        assert!((shift - alpha_q * m as f64 * (f as f64).ln()).abs() < 1e-12);
        let grad1 = backward_gradients(&g1, j1, &ps).unwrap();
        let grad2 = backward_gradients(&g2, j2, &ps).unwrap();
        let b1 = grad1.by_name(&ps, "logits").unwrap();
        let b2 = grad2.by_name(&ps, "logits").unwrap();
        assert!(b1.iter().any(|&x| x != 0.0), "toy gradient vanished");
        for (a, b) in b1.iter().zip(b2) {
            assert_eq!(a.to_bits(), b.to_bits(), "gradient changed under the shift");
        }
    }
}
