use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A reproducible random stream identified by `(seed, stream)`.
///
/// Independent chains get independent streams through [`RandomSource::child`],
/// so results never depend on which worker ran which chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomSource {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Derives the source for sub-task `index`. Children of distinct
    /// parents or distinct indices do not share streams.
    pub fn child(&self, index: u64) -> RandomSource {
        let seed = splitmix64(self.seed ^ splitmix64(self.stream.wrapping_add(0x5851_f42d)));
        RandomSource {
            seed,
            stream: index,
        }
    }

    /// Named sub-task, e.g. one pipeline stage.
    pub fn labeled(&self, label: &str) -> RandomSource {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for b in label.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        RandomSource {
            seed: splitmix64(self.seed ^ h),
            stream: self.stream,
        }
    }
}
