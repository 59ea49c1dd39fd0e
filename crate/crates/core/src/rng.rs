//! Counter-addressed Gaussian draws.
//!
//! A draw is addressed by `(seed, path_index, step_index, slot)`. The ChaCha
//! key mixes `seed` and `path_index`, the ChaCha stream id is `step_index`, and
//! `slot` is the position in the stream, so no draw depends on which thread
//! produced the neighbouring paths.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub path_index: u64,
    pub step_index: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, path_index: u64, step_index: u64) -> Self {
        Self {
            seed,
            path_index,
            step_index,
        }
    }

    pub fn at_step(self, step_index: u64) -> Self {
        Self { step_index, ..self }
    }

    fn engine(&self) -> ChaCha8Rng {
        let key = splitmix64(self.seed ^ splitmix64(self.path_index.wrapping_add(0x5851_f42d_4c95_7f2d)));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(self.step_index);
        rng
    }

    /// The first `count` standard normal draws of this stream.
    pub fn normals(&self, count: usize) -> Vec<f64> {
        let mut rng = self.engine();
        (0..count).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}
