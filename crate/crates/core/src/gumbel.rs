//! Gumbel(0,1) noise and the relaxed categorical draw softmax((pi + g)/tau).
//!
//! Noise is always an explicit argument to the draw so that callers can
//! freeze it: training draws it from a named rng stream, tests pass fixed
//! vectors, and gradient checks stay deterministic.

use rand::Rng;

use crate::diffcore::{Graph, NodeId};

/// Uniform draws are clamped this far away from {0, 1} before the double
/// log, bounding the noise to roughly ±27.6.
const UNIFORM_CLAMP: f64 = 1e-12;

/// Map a uniform draw to a Gumbel(0,1) value, −log(−log u).
pub fn gumbel_from_uniform(u: f64) -> f64 {
    let u = u.clamp(UNIFORM_CLAMP, 1.0 - UNIFORM_CLAMP);
    -(-u.ln()).ln()
}

/// n independent Gumbel(0,1) draws.
pub fn gumbel_noise(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| gumbel_from_uniform(rng.gen::<f64>())).collect()
}

/// Relaxed categorical sample softmax((logits + noise)/tau) as plain values.
/// Panics on non-positive temperature, non-finite logits, or length mismatch.
pub fn gumbel_softmax_sample(logits: &[f64], tau: f64, noise: &[f64]) -> Vec<f64> {
    assert!(tau > 0.0, "temperature must be positive, got {tau}");
    assert_eq!(logits.len(), noise.len(), "logits/noise length mismatch");
    assert!(
        logits.iter().all(|v| v.is_finite()),
        "non-finite logits in relaxed categorical draw"
    );
    let scaled: Vec<f64> = logits
        .iter()
        .zip(noise)
        .map(|(&p, &g)| (p + g) / tau)
        .collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scaled.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for x in &mut out {
        *x /= sum;
    }
    out
}

/// Same draw recorded on a graph, so gradients flow to the logits while the
/// frozen noise stays a constant.
pub fn gumbel_softmax_node(g: &mut Graph, logits: NodeId, tau: f64, noise: &[f64]) -> NodeId {
    assert!(tau > 0.0, "temperature must be positive, got {tau}");
    let noise_node = g.constant_vec(noise);
    let shifted = g.add(logits, noise_node);
    let scaled = g.scale(shifted, 1.0 / tau);
    g.softmax(scaled)
}

/// Shannon entropy in nats, with 0·ln 0 read as 0.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum()
}
