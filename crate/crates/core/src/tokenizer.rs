//! Deterministic geometric tokenizer: chains are encoded by quantizing their
//! per-residue window descriptors, and token sequences are decoded by reading
//! internal coordinates back out of the code vectors and rebuilding the trace.

use crate::codebook::{quantize, Codebook};
use crate::error::{Error, Result};
use crate::geom::{
    chain_descriptors, descriptor_dim, rebuild_chain, rmsd_aligned, seed_frame, tm_score, validate_window,
    window_start, Chain, InternalCoord,
};

/// Default descriptor window (residues).
pub const DEFAULT_WINDOW: usize = 5;

/// Structure tokens of one chain, bound to the codebook and window that
/// produced them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    pub tokens: Vec<u32>,
    pub codebook_id: String,
    pub window: usize,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks every token against a codebook of `m` codes.
    pub fn check_range(&self, m: usize) -> Result<()> {
        match self.tokens.iter().position(|&t| t as usize >= m) {
            Some(position) => Err(Error::TokenOutOfRange { position, token: self.tokens[position], m }),
            None => Ok(()),
        }
    }
}

fn check_codebook_dim(cb: &Codebook, window: usize) -> Result<()> {
    validate_window(window)?;
    let dim = descriptor_dim(window);
    if cb.d() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: cb.d() });
    }
    Ok(())
}

pub fn encode(chain: &Chain, cb: &Codebook, window: usize) -> Result<TokenSeq> {
    check_codebook_dim(cb, window)?;
    let tokens = chain_descriptors(chain, window)?
        .iter()
        .map(|d| quantize(&d.values, cb).map(|k| k as u32))
        .collect::<Result<_>>()?;
    Ok(TokenSeq { tokens, codebook_id: cb.id().to_string(), window })
}

/// Internal coordinates stored in code vector `values` for the residue at
/// 0-based offset `offset` of its window: the bond from `offset` to
/// `offset + 1`, the angle at `offset` and the dihedral ending at
/// `offset + 1`.
fn triple_at(values: &[f64], window: usize, offset: usize, index: usize) -> Result<InternalCoord> {
    let bond = values[offset];
    let angle = values[(window - 1) + (offset - 1)];
    let base = (window - 1) + (window - 2) + 2 * (offset - 2);
    let (sin, cos) = (values[base], values[base + 1]);
    if sin == 0.0 && cos == 0.0 {
        return Err(Error::InvalidInternalCoordinate { index, reason: "dihedral (sin, cos) pair is zero".into() });
    }
    Ok(InternalCoord { bond, angle, dihedral: sin.atan2(cos) })
}

/// Rebuilds a chain from its tokens.
///
/// The first token's window supplies the seed frame (first two bonds and the
/// angle between them). Residue `i >= 3` is placed from token `i - 1`: for
/// interior tokens that is the triple around the window centre; for tokens
/// whose window is clamped at a terminus it is the triple around the token's
/// own residue within that window.
pub fn decode(seq: &TokenSeq, cb: &Codebook, window: usize) -> Result<Chain> {
    if seq.window != window {
        return Err(Error::WindowMismatch { seq: seq.window, requested: window });
    }
    if seq.codebook_id != cb.id() {
        return Err(Error::MismatchedCodebook { seq: seq.codebook_id.clone(), other: cb.id().to_string() });
    }
    decode_unbound(&seq.tokens, cb, window)
}

/// [`decode`] without the codebook-binding check, for externally produced
/// token sequences.
pub fn decode_unbound(tokens: &[u32], cb: &Codebook, window: usize) -> Result<Chain> {
    check_codebook_dim(cb, window)?;
    let l = tokens.len();
    if l < window.max(4) {
        return Err(Error::ChainTooShort { len: l, min: window.max(4) });
    }
    if let Some(position) = tokens.iter().position(|&t| t as usize >= cb.m()) {
        return Err(Error::TokenOutOfRange { position, token: tokens[position], m: cb.m() });
    }
    let code = |t: usize| cb.row(tokens[t] as usize);

    let first = code(0);
    let seed = seed_frame(first[0], first[1], first[window - 1]).map_err(|e| match e {
        Error::InvalidInternalCoordinate { reason, .. } => Error::InvalidInternalCoordinate { index: 0, reason },
        other => other,
    })?;
    let internal = (2..l - 1)
        .map(|t| {
            let offset = t - window_start(t, l, window);
            triple_at(code(t), window, offset, t)
        })
        .collect::<Result<Vec<_>>>()?;
    rebuild_chain(&internal, seed).map_err(|e| match e {
        // Re-index onto token positions.
        Error::InvalidInternalCoordinate { index, reason } => Error::InvalidInternalCoordinate { index: index + 2, reason },
        other => other,
    })
}

/// Fidelity of one encode/decode cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTrip {
    pub rmsd: f64,
    pub tm_score: f64,
}

pub fn roundtrip_report(chain: &Chain, cb: &Codebook, window: usize) -> Result<RoundTrip> {
    let decoded = decode(&encode(chain, cb, window)?, cb, window)?;
    Ok(RoundTrip { rmsd: rmsd_aligned(&decoded, chain)?, tm_score: tm_score(&decoded, chain)? })
}

/// Codebook whose rows are exactly the (distinct) descriptors of `chains`.
pub fn lossless_codebook(chains: &[Chain], window: usize) -> Result<Codebook> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for c in chains {
        for d in chain_descriptors(c, window)? {
            let key: Vec<u64> = d.values.iter().map(|v| v.to_bits()).collect();
            if seen.insert(key) {
                rows.push(d.values);
            }
        }
    }
    Codebook::from_rows(&rows)
}
