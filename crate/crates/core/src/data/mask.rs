//! Epsilon-masking of gold frames: each frame-bearing event is observed
//! independently with probability epsilon. Evaluation always masks
//! everything (epsilon = 0).

use rand::Rng;

use crate::encoder::ObservationMask;

/// Deterministic core: event m is observed iff `uniforms[m] < epsilon` and
/// a gold frame exists. Sharing the uniforms across epsilon values couples
/// the masks so a larger epsilon observes a superset of events.
pub fn mask_from_uniforms(
    frames: &[Option<usize>],
    epsilon: f64,
    uniforms: &[f64],
) -> ObservationMask {
    assert!((0.0..=1.0).contains(&epsilon), "epsilon must lie in [0, 1]");
    assert_eq!(frames.len(), uniforms.len(), "one uniform draw per event");
    ObservationMask::from_events(
        frames
            .iter()
            .zip(uniforms)
            .map(|(f, &u)| f.filter(|_| u < epsilon))
            .collect(),
    )
}

/// Draw one uniform per event (frame-bearing or not, keeping the stream
/// aligned) and apply the threshold rule.
pub fn mask_frames(
    frames: &[Option<usize>],
    epsilon: f64,
    rng: &mut impl Rng,
) -> ObservationMask {
    let uniforms: Vec<f64> = (0..frames.len()).map(|_| rng.gen::<f64>()).collect();
    mask_from_uniforms(frames, epsilon, &uniforms)
}
