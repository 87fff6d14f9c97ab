//! File formats: multi-model Cα PDB, codebook CSV / binary, token text files,
//! synonym dictionaries and report tables.

mod codebook_file;
mod pdb;
mod report;
mod tokens;

pub use codebook_file::{
    load_codebook, load_synonym_dict, save_codebook_binary, save_codebook_csv, save_synonym_dict, CodebookFormat,
    CODEBOOK_MAGIC, CODEBOOK_VERSION,
};
pub use pdb::{parse_structure, write_structure, StructureFileOptions};
pub use report::{
    corpus_report_csv, parse_reports_csv, reports_to_csv, reports_to_jsonl, rmsf_profile_csv, UNDEFINED,
};
pub use tokens::{load_tokens, save_tokens};
