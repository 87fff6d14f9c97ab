//! Shared fixtures for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokensyn::geom::chain_descriptors;
use tokensyn::{synth, train_codebook, Chain, Codebook};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_codebook(m: usize, d: usize, seed: u64) -> Codebook {
    let mut r = rng(seed);
    let data = (0..m * d).map(|_| r.random_range(-5.0..5.0)).collect();
    Codebook::from_flat(m, d, data).expect("random rows are distinct")
}

pub fn chains(n: usize, len: usize, seed: u64) -> Vec<Chain> {
    let mut r = rng(seed);
    (0..n).map(|_| synth::random_chain(len, &mut r)).collect()
}

/// A window-5 codebook trained on synthetic chains.
pub fn trained_codebook(m: usize, seed: u64) -> Codebook {
    let samples: Vec<Vec<f64>> = chains(40, 100, seed)
        .iter()
        .flat_map(|c| chain_descriptors(c, 5).expect("valid chain").into_iter().map(|d| d.values))
        .collect();
    train_codebook(&samples, m, 50, seed).expect("enough samples").codebook
}
