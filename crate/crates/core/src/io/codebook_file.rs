use std::fmt::Write as _;

use crate::codebook::{Codebook, SynonymDict};
use crate::error::{Error, Result};

pub const CODEBOOK_MAGIC: &[u8; 4] = b"TKCB";
pub const CODEBOOK_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodebookFormat {
    Csv,
    Binary,
}

impl CodebookFormat {
    /// Binary when the bytes start with the magic, CSV otherwise.
    pub fn sniff(bytes: &[u8]) -> Self {
        if bytes.starts_with(CODEBOOK_MAGIC) {
            Self::Binary
        } else {
            Self::Csv
        }
    }
}

pub fn load_codebook(bytes: &[u8], format: CodebookFormat) -> Result<Codebook> {
    match format {
        CodebookFormat::Binary => load_binary(bytes),
        CodebookFormat::Csv => load_csv(bytes),
    }
}

fn le_u32(bytes: &[u8]) -> usize {
    u32::from_le_bytes(bytes.try_into().expect("four bytes")) as usize
}

fn load_binary(bytes: &[u8]) -> Result<Codebook> {
    if bytes.len() < 4 || &bytes[..4] != CODEBOOK_MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedFile { expected: HEADER_LEN, found: bytes.len() });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CODEBOOK_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let m = le_u32(&bytes[6..10]);
    let d = le_u32(&bytes[10..14]);
    let expected = m
        .checked_mul(d)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or(Error::TruncatedFile { expected: usize::MAX, found: bytes.len() })?;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes { extra: bytes.len() - expected });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")) as f64)
        .collect();
    Codebook::from_flat(m, d, data)
}

/// Binary form. Values are narrowed to `f32`.
pub fn save_codebook_binary(cb: &Codebook) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * cb.as_flat().len());
    out.extend_from_slice(CODEBOOK_MAGIC);
    out.extend_from_slice(&CODEBOOK_VERSION.to_le_bytes());
    out.extend_from_slice(&(cb.m() as u32).to_le_bytes());
    out.extend_from_slice(&(cb.d() as u32).to_le_bytes());
    for &v in cb.as_flat() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn csv_reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(bytes)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::MalformedRecord { line, reason: e.to_string() }
}

fn load_csv(bytes: &[u8]) -> Result<Codebook> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut first = true;
    for record in csv_reader(bytes).records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if first => {
                first = false;
                continue;
            }
            Err(_) => {
                let bad = record.iter().find(|f| f.parse::<f64>().is_err()).unwrap_or_default();
                return Err(Error::MalformedRecord { line, reason: format!("'{bad}' is not a number") });
            }
        };
        first = false;
        if let Some(expected) = rows.first().map(Vec::len) {
            if row.len() != expected {
                return Err(Error::RaggedRows { row: rows.len(), expected, found: row.len() });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    Codebook::from_rows(&rows)
}

/// Headerless CSV with shortest round-trip decimal formatting.
pub fn save_codebook_csv(cb: &Codebook) -> Vec<u8> {
    let mut out = String::new();
    for row in cb.rows() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

/// `token,synonyms` CSV, synonyms space-separated, with `tau` and the
/// codebook id in leading comments.
pub fn save_synonym_dict(dict: &SynonymDict) -> Vec<u8> {
    let mut out = String::new();
    let _ = writeln!(out, "# tau: {}", dict.tau());
    let _ = writeln!(out, "# codebook: {}", dict.codebook_id());
    out.push_str("token,synonyms\n");
    for (k, set) in dict.entries().iter().enumerate() {
        let list: Vec<String> = set.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "{k},{}", list.join(" "));
    }
    out.into_bytes()
}

pub fn load_synonym_dict(bytes: &[u8]) -> Result<SynonymDict> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::MalformedRecord { line: 0, reason: "not valid UTF-8".into() })?;
    let mut tau = None;
    let mut id = None;
    let mut entries: Vec<Vec<u32>> = Vec::new();
    let mut seen_header = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("tau:") {
                let v = v.trim();
                tau = Some(v.parse::<f64>().map_err(|_| Error::MalformedRecord { line: lineno, reason: format!("bad tau '{v}'") })?);
            } else if let Some(v) = comment.strip_prefix("codebook:") {
                id = Some(v.trim().to_string());
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if !seen_header {
            if line != "token,synonyms" {
                return Err(Error::MalformedRecord { line: lineno, reason: "expected 'token,synonyms' header".into() });
            }
            seen_header = true;
            continue;
        }
        let (token, list) = line
            .split_once(',')
            .ok_or_else(|| Error::MalformedRecord { line: lineno, reason: "expected 'token,synonyms'".into() })?;
        let token_err = |text: &str| Error::NonIntegerToken { line: lineno, column: 1, text: text.to_string() };
        let k: usize = token.trim().parse().map_err(|_| token_err(token))?;
        if k != entries.len() {
            return Err(Error::MalformedRecord { line: lineno, reason: format!("expected token {} but found {k}", entries.len()) });
        }
        let set = list
            .split_whitespace()
            .map(|t| t.parse::<u32>().map_err(|_| token_err(t)))
            .collect::<Result<Vec<_>>>()?;
        entries.push(set);
    }
    let tau = tau.ok_or(Error::MissingHeader)?;
    let id = id.ok_or(Error::MissingHeader)?;
    if entries.is_empty() {
        return Err(Error::EmptyInput);
    }
    SynonymDict::from_entries(tau, id, entries)
}
