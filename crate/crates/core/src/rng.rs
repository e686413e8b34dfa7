//! Counter-based random streams.
//!
//! Every random quantity in a run is addressed by a key rather than drawn
//! from a shared generator: a [`StreamKey`] names one Monte Carlo sample
//! (master seed, replicate, level, sample index, resample attempt) and a
//! [`StreamRole`] separates the tree from the coefficients. Inside a sample,
//! [`NodeStreams`] hands out an independent ChaCha8 stream per wavelet node
//! `(j, n)`, so a node's uniforms and coefficients do not depend on which
//! other nodes happen to exist. This is what makes results independent of
//! thread scheduling and couples fields across densities and truncations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Largest `d * j` for which node indices fit into a ChaCha stream id.
pub const MAX_NODE_BITS: u32 = 57;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Tree,
    Coefficients,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::Tree => 0x7472_6565,
            StreamRole::Coefficients => 0x636f_6566,
        }
    }
}

/// Address of one Monte Carlo sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master: u64,
    pub replicate: u64,
    pub level: u32,
    pub sample: u64,
    pub attempt: u32,
}

impl StreamKey {
    pub fn new(master: u64) -> Self {
        StreamKey {
            master,
            replicate: 0,
            level: 0,
            sample: 0,
            attempt: 0,
        }
    }

    pub fn with_replicate(self, replicate: u64) -> Self {
        StreamKey { replicate, ..self }
    }

    pub fn with_level(self, level: u32) -> Self {
        StreamKey { level, ..self }
    }

    pub fn with_sample(self, sample: u64) -> Self {
        StreamKey { sample, ..self }
    }

    pub fn with_attempt(self, attempt: u32) -> Self {
        StreamKey { attempt, ..self }
    }

    /// 256-bit ChaCha key for this sample and role.
    pub fn seed(&self, role: StreamRole) -> [u8; 32] {
        let mut h = splitmix64(self.master);
        for word in [
            self.replicate,
            u64::from(self.level),
            self.sample,
            u64::from(self.attempt),
            role.tag(),
        ] {
            h = splitmix64(h ^ word);
        }
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            h = splitmix64(h);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        seed
    }

    pub fn node_streams(&self, role: StreamRole) -> NodeStreams {
        NodeStreams {
            seed: self.seed(role),
        }
    }

    /// A single sequential stream for this key, for callers that do not need
    /// per-node addressing.
    pub fn rng(&self, role: StreamRole) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.seed(role))
    }
}

/// Per-node stream factory: `(scale j, node index n)` selects a ChaCha
/// stream id, so draws for distinct nodes never overlap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeStreams {
    seed: [u8; 32],
}

impl NodeStreams {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        NodeStreams { seed }
    }

    pub fn node(&self, j: u32, index: u64) -> ChaCha8Rng {
        debug_assert!(j < 64);
        debug_assert!(index < (1u64 << MAX_NODE_BITS));
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream((index << 6) | u64::from(j));
        rng
    }

    /// The uniform `U_{j,n}` in `[0, 1)` attached to node `(j, n)`.
    pub fn uniform(&self, j: u32, index: u64) -> f64 {
        use rand::Rng;
        self.node(j, index).random::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn keys_separate_roles_and_fields() {
        let k = StreamKey::new(7);
        assert_ne!(k.seed(StreamRole::Tree), k.seed(StreamRole::Coefficients));
        assert_ne!(k.seed(StreamRole::Tree), k.with_level(1).seed(StreamRole::Tree));
        assert_ne!(k.seed(StreamRole::Tree), k.with_sample(1).seed(StreamRole::Tree));
        assert_ne!(k.seed(StreamRole::Tree), k.with_replicate(1).seed(StreamRole::Tree));
        assert_ne!(k.seed(StreamRole::Tree), k.with_attempt(1).seed(StreamRole::Tree));
        assert_eq!(k.seed(StreamRole::Tree), StreamKey::new(7).seed(StreamRole::Tree));
    }

    #[test]
    fn node_streams_are_addressable() {
        let s = StreamKey::new(1).node_streams(StreamRole::Tree);
        let a: u64 = s.node(3, 5).random();
        let b: u64 = s.node(3, 5).random();
        let c: u64 = s.node(3, 6).random();
        let e: u64 = s.node(4, 5).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, e);
    }

    #[test]
    fn node_uniforms_look_uniform() {
        let s = StreamKey::new(99).node_streams(StreamRole::Tree);
        let n = 20_000u64;
        let mean = (0..n).map(|i| s.uniform(7, i)).sum::<f64>() / n as f64;
        // sd of the mean is sqrt(1/12/n) ~ 0.002
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }
}
