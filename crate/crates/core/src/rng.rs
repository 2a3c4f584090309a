//! Named, reproducible random substreams derived from a single run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Mixes a seed with a stream name and any number of integer coordinates.
pub fn derive_seed(seed: u64, name: &str, coords: &[u64]) -> u64 {
    let mut h = splitmix(seed ^ fnv1a(name));
    for &c in coords {
        h = splitmix(h ^ c);
    }
    h
}

pub fn substream(seed: u64, name: &str, coords: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, name, coords))
}
