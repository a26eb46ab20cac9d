//! Seeded random streams.
//!
//! Every random quantity is drawn from ChaCha8 seeded through
//! `ChaCha8Rng::seed_from_u64`. Independent streams for repetitions, sweep
//! cells and sample blocks come from [`derive_seed`] (a SplitMix64 step over
//! the master seed and an index) or from ChaCha's own 64-bit stream selector.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Rows per independently seeded sampling block.
pub const BLOCK_ROWS: usize = 1 << 16;

/// SplitMix64 finaliser applied to `master ⊕ golden·(index + 1)`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Stream `stream` of the generator seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `(block index, rows in block)` covering `n_rows` rows.
pub fn blocks(n_rows: usize) -> impl Iterator<Item = (u64, usize)> {
    let n_blocks = n_rows.div_ceil(BLOCK_ROWS);
    (0..n_blocks).map(move |b| {
        let start = b * BLOCK_ROWS;
        (b as u64, BLOCK_ROWS.min(n_rows - start))
    })
}
