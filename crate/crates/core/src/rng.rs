//! Counter-addressed random streams.
//!
//! A stream is identified by `(seed, stream_id)`. Draws are grouped into
//! fixed-size chunks, and chunk `c` of a stream reads the ChaCha8 keystream
//! starting at word `c << CHUNK_WORD_BITS`. Any worker can therefore
//! reproduce any chunk without touching the others, which is what makes
//! parallel estimates independent of the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of draws of the random vector per chunk.
pub const CHUNK_DRAWS: usize = 1024;

/// Each chunk owns `2^40` keystream words.
const CHUNK_WORD_BITS: u32 = 40;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Expand a 64-bit seed into a 256-bit ChaCha key.
fn key_from_seed(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for block in key.chunks_exact_mut(8) {
        block.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Generator positioned at the start of `chunk` of stream `(seed, stream_id)`.
pub fn chunk_rng(seed: u64, stream_id: u64, chunk: u64) -> ChaCha8Rng {
    assert!(chunk < (1u64 << 28), "chunk index {chunk} exceeds the addressable range");
    let mut rng = ChaCha8Rng::from_seed(key_from_seed(seed));
    rng.set_stream(stream_id);
    rng.set_word_pos(u128::from(chunk) << CHUNK_WORD_BITS);
    rng
}

/// Split `count` draws into `(chunk_index, draws_in_chunk)` pairs.
pub fn chunks(count: usize) -> impl Iterator<Item = (u64, usize)> + Clone {
    let full = count / CHUNK_DRAWS;
    let rest = count % CHUNK_DRAWS;
    (0..full)
        .map(|c| (c as u64, CHUNK_DRAWS))
        .chain((rest > 0).then_some((full as u64, rest)))
}

/// Derive a child seed, e.g. one per grid cell.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut state = seed;
    let mut h = splitmix64(&mut state);
    for b in label.bytes() {
        state ^= u64::from(b).wrapping_mul(0x100_0000_01b3);
        h ^= splitmix64(&mut state);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn chunk_is_reproducible() {
        let a: Vec<u64> = (0..8).map({
            let mut r = chunk_rng(7, 3, 5);
            move |_| r.random()
        }).collect();
        let mut r = chunk_rng(7, 3, 5);
        let b: Vec<u64> = (0..8).map(|_| r.random()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn streams_and_chunks_differ() {
        let x: u64 = chunk_rng(7, 0, 0).random();
        assert_ne!(x, chunk_rng(7, 1, 0).random::<u64>());
        assert_ne!(x, chunk_rng(7, 0, 1).random::<u64>());
        assert_ne!(x, chunk_rng(8, 0, 0).random::<u64>());
    }

    #[test]
    fn chunk_split_covers_count() {
        let total: usize = chunks(2 * CHUNK_DRAWS + 5).map(|(_, n)| n).sum();
        assert_eq!(total, 2 * CHUNK_DRAWS + 5);
        assert_eq!(chunks(CHUNK_DRAWS).count(), 1);
        assert_eq!(chunks(0).count(), 0);
    }

    #[test]
    fn derived_seeds_depend_on_label() {
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_eq!(derive_seed(1, "a"), derive_seed(1, "a"));
    }
}
