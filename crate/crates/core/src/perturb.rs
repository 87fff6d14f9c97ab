//! Synonym-swap sampling of token sequences and ensemble generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codebook::{Codebook, SynonymDict};
use crate::ensemble::{Ensemble, Source};
use crate::error::{Error, Result};
use crate::geom::{rmsd_aligned, tm_score, Chain};
use crate::tokenizer::{decode, encode, TokenSeq};

/// Default number of perturbed structures per target.
pub const DEFAULT_NUM_SAMPLES: usize = 250;
/// Number of swaps averaged in the multi-swap validation column.
pub const VALIDATION_SWAPS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapConfig {
    pub seed: u64,
    pub swap_prob: f64,
    pub num_samples: usize,
}

impl Default for SwapConfig {
    fn default() -> Self {
        Self { seed: 0, swap_prob: 1.0, num_samples: DEFAULT_NUM_SAMPLES }
    }
}

impl SwapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.swap_prob) {
            return Err(Error::InvalidConfig(format!("swap_prob {} is outside [0, 1]", self.swap_prob)));
        }
        if self.num_samples == 0 {
            return Err(Error::InvalidConfig("num_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of sample `index` under master seed `seed`:
/// `mix64(seed ^ mix64(index + 0x9e3779b97f4a7c15))`, where `mix64` is the
/// SplitMix64 finaliser. Streams for different indices are independent of how
/// many samples are drawn.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// Replaces each token, with probability `swap_prob`, by a uniformly chosen
/// member of its synonym set (which includes the token itself).
pub fn synonym_swap(seq: &TokenSeq, dict: &SynonymDict, seed: u64, swap_prob: f64) -> Result<TokenSeq> {
    if seq.codebook_id != dict.codebook_id() {
        return Err(Error::MismatchedCodebook { seq: seq.codebook_id.clone(), other: dict.codebook_id().to_string() });
    }
    if !(0.0..=1.0).contains(&swap_prob) {
        return Err(Error::InvalidConfig(format!("swap_prob {swap_prob} is outside [0, 1]")));
    }
    seq.check_range(dict.m())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tokens = seq
        .tokens
        .iter()
        .map(|&t| {
            let u: f64 = rng.random();
            let set = dict.synonyms(t as usize);
            if u < swap_prob && set.len() > 1 {
                set[rng.random_range(0..set.len())]
            } else {
                t
            }
        })
        .collect();
    Ok(TokenSeq { tokens, codebook_id: seq.codebook_id.clone(), window: seq.window })
}

/// Encodes `chain`, then decodes `cfg.num_samples` independent synonym swaps.
/// Member `j` uses seed [`sample_seed`]`(cfg.seed, j)`, so the output does not
/// depend on the thread count.
pub fn generate_ensemble(
    chain: &Chain,
    cb: &Codebook,
    dict: &SynonymDict,
    cfg: &SwapConfig,
    window: usize,
) -> Result<Ensemble> {
    cfg.validate()?;
    let tokens = encode(chain, cb, window)?;
    let members = perturbed_decodes(&tokens, cb, dict, cfg, window)?;
    Ensemble::new(members, Source::Generated)
}

/// Decoded synonym swaps of an existing token sequence.
pub fn perturbed_decodes(
    tokens: &TokenSeq,
    cb: &Codebook,
    dict: &SynonymDict,
    cfg: &SwapConfig,
    window: usize,
) -> Result<Vec<Chain>> {
    cfg.validate()?;
    (0..cfg.num_samples)
        .into_par_iter()
        .map(|j| {
            let swapped = synonym_swap(tokens, dict, sample_seed(cfg.seed, j as u64), cfg.swap_prob)?;
            Ok(decode(&swapped, cb, window)?.with_label(format!("sample_{j}")))
        })
        .collect()
}

/// Per-chain effect of synonym swapping.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub label: String,
    /// One full swap, decoded, against the decoded unperturbed tokens.
    pub tm_single: f64,
    pub rmsd_single: f64,
    /// Mean over [`VALIDATION_SWAPS`] swaps, against the decoded unperturbed tokens.
    pub tm_mean: f64,
    pub rmsd_mean: f64,
    /// The single swap against the raw input structure.
    pub tm_vs_raw: f64,
    pub rmsd_vs_raw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationTable {
    pub rows: Vec<ValidationRow>,
    pub mean_tm_single: f64,
    pub mean_rmsd_single: f64,
    pub mean_tm_mean: f64,
    pub mean_rmsd_mean: f64,
    pub mean_tm_vs_raw: f64,
    pub mean_rmsd_vs_raw: f64,
}

/// Structural change caused by swapping every token once (`swap_prob = 1`).
pub fn perturbation_validation(
    chains: &[Chain],
    cb: &Codebook,
    dict: &SynonymDict,
    window: usize,
    seed: u64,
) -> Result<ValidationTable> {
    if chains.is_empty() {
        return Err(Error::EmptyInput);
    }
    let rows = chains
        .par_iter()
        .enumerate()
        .map(|(i, chain)| {
            let tokens = encode(chain, cb, window)?;
            let baseline = decode(&tokens, cb, window)?;
            let cfg = SwapConfig { seed: sample_seed(seed, i as u64), swap_prob: 1.0, num_samples: VALIDATION_SWAPS };
            let decodes = perturbed_decodes(&tokens, cb, dict, &cfg, window)?;
            let mut tm_sum = 0.0;
            let mut rmsd_sum = 0.0;
            for d in &decodes {
                tm_sum += tm_score(d, &baseline)?;
                rmsd_sum += rmsd_aligned(d, &baseline)?;
            }
            let first = &decodes[0];
            Ok(ValidationRow {
                label: chain.label().to_string(),
                tm_single: tm_score(first, &baseline)?,
                rmsd_single: rmsd_aligned(first, &baseline)?,
                tm_mean: tm_sum / decodes.len() as f64,
                rmsd_mean: rmsd_sum / decodes.len() as f64,
                tm_vs_raw: tm_score(first, chain)?,
                rmsd_vs_raw: rmsd_aligned(first, chain)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = |f: fn(&ValidationRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    Ok(ValidationTable {
        mean_tm_single: mean(|r| r.tm_single),
        mean_rmsd_single: mean(|r| r.rmsd_single),
        mean_tm_mean: mean(|r| r.tm_mean),
        mean_rmsd_mean: mean(|r| r.rmsd_mean),
        mean_tm_vs_raw: mean(|r| r.tm_vs_raw),
        mean_rmsd_vs_raw: mean(|r| r.rmsd_vs_raw),
        rows,
    })
}

/// Mean TM-score and RMSD between paired structures, e.g. externally decoded
/// perturbed structures against their unperturbed decodes.
pub fn paired_similarity(perturbed: &[Chain], originals: &[Chain]) -> Result<(f64, f64)> {
    if perturbed.len() != originals.len() {
        return Err(Error::MismatchedLengths { left: perturbed.len(), right: originals.len() });
    }
    if perturbed.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut tm = 0.0;
    let mut rmsd = 0.0;
    for (p, o) in perturbed.iter().zip(originals) {
        tm += tm_score(p, o)?;
        rmsd += rmsd_aligned(p, o)?;
    }
    let n = perturbed.len() as f64;
    Ok((tm / n, rmsd / n))
}
