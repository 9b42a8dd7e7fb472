//! Random streams.
//!
//! Every stochastic component draws from ChaCha8 (the 8-round ChaCha stream
//! cipher used as a generator, as implemented by `rand_chacha`). The 256-bit
//! key is expanded from a 64-bit seed by `SeedableRng::seed_from_u64`; the
//! 64-bit stream id selects an independent stream under that key. Training
//! gives each document its own stream so trajectories depend only on the
//! seed and the sweep order, never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const INFERENCE_STREAM_BASE: u64 = 1 << 40;

pub fn stream(seed: u64, stream_id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Stream for document `doc` of corpus side `side` during training.
pub fn train_stream(seed: u64, side: usize, doc: usize) -> Rng {
    stream(seed, ((side as u64) << 32) | doc as u64)
}

/// Stream for held-out document `doc` during inference.
pub fn inference_stream(seed: u64, doc: usize) -> Rng {
    stream(seed, INFERENCE_STREAM_BASE | doc as u64)
}

/// Draws an index with probability proportional to `weights[i]`.
/// `total` must be the sum of `weights`.
pub fn sample_index<R: rand::Rng + ?Sized>(rng: &mut R, weights: &[f64], total: f64) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if w > 0.0 {
            last_positive = i;
        }
        if u < acc {
            return i;
        }
    }
    last_positive
}
