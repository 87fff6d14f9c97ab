//! Structure tokenization of Cα traces and ensemble generation by swapping
//! tokens for near-identical codebook neighbours ("synonyms").
//!
//! The pipeline: [`tokenizer::encode`] a chain against a [`Codebook`],
//! perturb the tokens within their [`SynonymDict`] sets, decode each variant
//! back to coordinates, then compare the resulting [`Ensemble`] with a
//! reference using [`metrics`].

pub mod codebook;
pub mod ensemble;
pub mod error;
pub mod geom;
pub mod io;
pub mod metrics;
pub mod perturb;
pub mod synth;
pub mod tokenizer;

pub use codebook::{
    build_synonym_dict, pairwise_distances, project_2d, quantize, redundancy_stats, train_codebook, Codebook,
    DistanceMatrix, KMeansFit, Projection, RedundancyStats, SynonymDict, DEFAULT_TAU,
};
pub use ensemble::{Ensemble, Residue, Source};
pub use error::{Error, Result};
pub use geom::{kabsch_superpose, rmsd_aligned, tm_score, Chain, Descriptor, Point, Superposition};
pub use io::{CodebookFormat, StructureFileOptions};
pub use metrics::{evaluate_ensembles, CorpusReport, EnsembleReport, EvalConfig};
pub use perturb::{generate_ensemble, synonym_swap, SwapConfig, DEFAULT_NUM_SAMPLES};
pub use tokenizer::{decode, encode, TokenSeq, DEFAULT_WINDOW};
