//! Substream derivation. Every random draw in the crate comes from
//! `substream(master, tag, index)`, so results do not depend on how work is
//! split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Module tags for substream derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    Coefficients = 1,
    FullSde = 2,
    ExitStart = 3,
    GraphDiffusion = 4,
    Limit = 5,
    Observable = 6,
    Oracle = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for item `index` of the stream `tag` under `master`.
pub fn substream(master: u64, tag: StreamTag, index: u64) -> ChaCha8Rng {
    let key = splitmix64(master ^ splitmix64(tag as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Same as [`substream`] with a second index folded into the key.
pub fn substream2(master: u64, tag: StreamTag, outer: u64, inner: u64) -> ChaCha8Rng {
    substream(splitmix64(master ^ splitmix64(outer.wrapping_add(0x5eed))), tag, inner)
}
