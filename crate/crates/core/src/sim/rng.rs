use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Word offset between neuron substreams within one path stream.
const NEURON_STRIDE_BITS: u32 = 36;

/// Master seed plus counter-based stream derivation: the generator for
/// `(path, neuron)` depends only on those indices, never on scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        RngSpec { seed }
    }

    /// Generator for neuron `neuron` on sample path `path`.
    pub fn stream(&self, path: u64, neuron: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path);
        rng.set_word_pos(u128::from(neuron) << NEURON_STRIDE_BITS);
        rng
    }
}
