//! Named, replayable random substreams.
//!
//! Every source of randomness in the artifact derives from one master seed
//! through `(seed, stream name, indices)`, so any component (mask drawing,
//! Gumbel noise, initialization, evaluation chains) can be replayed in
//! isolation, and worker fan-out does not perturb the streams of other
//! documents.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Stream used for parameter initialization.
pub const STREAM_INIT: &str = "init";
/// Stream used for per-epoch, per-document observation masks.
pub const STREAM_MASK: &str = "data-mask";
/// Stream used for per-epoch, per-document Gumbel noise.
pub const STREAM_GUMBEL: &str = "gumbel";
/// Stream used for evaluation-time sampling (fixed, epoch-independent).
pub const STREAM_EVAL: &str = "eval";
/// Stream used for per-epoch document shuffling.
pub const STREAM_SHUFFLE: &str = "shuffle";
/// Stream used by the synthetic corpus generator.
pub const STREAM_SYNTH: &str = "synth";
/// Stream used by inverse-narrative-cloze dataset construction.
pub const STREAM_INC: &str = "inc";
/// Stream used by free-running script generation.
pub const STREAM_GEN: &str = "gen";
/// Stream used for classifier logit dropout masks.
pub const STREAM_DROPOUT: &str = "dropout";

/// Derive an independent, replayable RNG from `(master seed, name, parts)`.
pub fn substream(master: u64, name: &str, parts: &[u64]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update((name.len() as u64).to_le_bytes());
    hasher.update(name.as_bytes());
    for part in parts {
        hasher.update(part.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_are_deterministic() {
        let mut a = substream(7, STREAM_GUMBEL, &[3, 11]);
        let mut b = substream(7, STREAM_GUMBEL, &[3, 11]);
        for _ in 0..16 {
            assert_eq!(a.gen::<u64>(), b.gen::<u64>());
        }
    }

    #[test]
    fn substreams_differ_across_names_and_parts() {
        let mut a = substream(7, STREAM_GUMBEL, &[0]);
        let mut b = substream(7, STREAM_MASK, &[0]);
        let mut c = substream(7, STREAM_GUMBEL, &[1]);
        let x: u64 = a.gen();
        assert_ne!(x, b.gen());
        assert_ne!(x, c.gen());
    }
}
