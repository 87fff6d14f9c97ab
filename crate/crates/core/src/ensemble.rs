use crate::error::{Error, Result};
use crate::geom::Chain;

/// Where an ensemble came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Generated,
    Reference,
}

/// Residue identity as read from (or written to) a structure file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Residue {
    pub seq: i32,
    pub icode: char,
    pub name: String,
}

impl Residue {
    pub fn new(seq: i32, icode: char, name: impl Into<String>) -> Self {
        Self { seq, icode, name: name.into() }
    }
}

/// Conformations of one chain: equal length, same residue order.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    conformations: Vec<Chain>,
    source: Source,
    residues: Vec<Residue>,
    chain_id: char,
}

impl Ensemble {
    /// Builds an ensemble with residues numbered 1..=L as `UNK` on chain `A`.
    pub fn new(conformations: Vec<Chain>, source: Source) -> Result<Self> {
        let len = conformations.first().ok_or(Error::EmptyEnsemble)?.residue_count();
        let residues = (1..=len as i32).map(|i| Residue::new(i, ' ', "UNK")).collect();
        Self::with_residues(conformations, source, residues, 'A')
    }

    pub fn with_residues(
        conformations: Vec<Chain>,
        source: Source,
        residues: Vec<Residue>,
        chain_id: char,
    ) -> Result<Self> {
        if conformations.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let len = residues.len();
        for c in &conformations {
            if c.residue_count() != len {
                return Err(Error::MismatchedLengths { left: len, right: c.residue_count() });
            }
        }
        Ok(Self { conformations, source, residues, chain_id })
    }

    /// Same residue annotation, new coordinates.
    pub fn with_conformations(&self, conformations: Vec<Chain>, source: Source) -> Result<Self> {
        Self::with_residues(conformations, source, self.residues.clone(), self.chain_id)
    }

    pub fn conformations(&self) -> &[Chain] {
        &self.conformations
    }

    pub fn into_conformations(self) -> Vec<Chain> {
        self.conformations
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn residues(&self) -> &[Residue] {
        &self.residues
    }

    pub fn chain_id(&self) -> char {
        self.chain_id
    }

    pub fn len(&self) -> usize {
        self.conformations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conformations.is_empty()
    }

    pub fn residue_count(&self) -> usize {
        self.residues.len()
    }
}
