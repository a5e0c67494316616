//! Named random streams derived from a single master seed.
//!
//! Environment generation, measurement noise and policy sampling each draw
//! from their own stream so that changing how one source is consumed never
//! shifts the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamKind {
    Env,
    Noise,
    Policy,
    Init,
    Shuffle,
}

impl StreamKind {
    fn tag(self) -> u64 {
        match self {
            StreamKind::Env => 0x656e_7600,
            StreamKind::Noise => 0x6e6f_6973,
            StreamKind::Policy => 0x706f_6c69,
            StreamKind::Init => 0x696e_6974,
            StreamKind::Shuffle => 0x7368_7566,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for `kind` at the given path below `master` (e.g. env index, episode
/// index, cell coordinates).
pub fn derive_seed(master: u64, kind: StreamKind, path: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(kind.tag()));
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

pub fn stream(master: u64, kind: StreamKind, path: &[u64]) -> Stream {
    Stream::seed_from_u64(derive_seed(master, kind, path))
}
