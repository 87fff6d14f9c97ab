use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::tokenizer::TokenSeq;

fn parse_header(line: &str, lineno: usize) -> Result<(String, usize)> {
    let body = line.trim_start_matches('#');
    match body.split_whitespace().collect::<Vec<_>>()[..] {
        ["codebook:", id, "window:", w] => {
            let window = w.parse().map_err(|_| Error::MalformedRecord { line: lineno, reason: format!("window '{w}' is not an integer") })?;
            Ok((id.to_string(), window))
        }
        _ => Err(Error::MissingHeader),
    }
}

/// One sequence per line, whitespace-separated tokens, after a mandatory
/// `# codebook: <id> window: <w>` header. Other `#` lines and blank lines
/// are skipped. Token range is not checked here.
pub fn load_tokens(bytes: &[u8]) -> Result<Vec<TokenSeq>> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::MalformedRecord { line: 0, reason: "not valid UTF-8".into() })?;
    let mut header: Option<(String, usize)> = None;
    let mut seqs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if header.is_none() {
                header = Some(parse_header(trimmed, lineno)?);
            }
            continue;
        }
        let (id, window) = header.as_ref().ok_or(Error::MissingHeader)?;
        let mut tokens = Vec::new();
        let mut column = 0;
        for piece in line.split(|c: char| c.is_whitespace()) {
            if !piece.is_empty() {
                let t = piece.parse::<u32>().map_err(|_| Error::NonIntegerToken {
                    line: lineno,
                    column: column + 1,
                    text: piece.to_string(),
                })?;
                tokens.push(t);
            }
            column += piece.len() + 1;
        }
        seqs.push(TokenSeq { tokens, codebook_id: id.clone(), window: *window });
    }
    if header.is_none() {
        return Err(Error::MissingHeader);
    }
    Ok(seqs)
}

/// Writes `seqs` under one header. Every sequence must carry the given
/// codebook id and window and be non-empty.
pub fn save_tokens(codebook_id: &str, window: usize, seqs: &[TokenSeq]) -> Result<Vec<u8>> {
    if codebook_id.is_empty() || codebook_id.chars().any(char::is_whitespace) {
        return Err(Error::InvalidOption(format!("codebook id '{codebook_id}' must be a single non-empty word")));
    }
    let mut out = format!("# codebook: {codebook_id} window: {window}\n");
    for s in seqs {
        if s.codebook_id != codebook_id {
            return Err(Error::MismatchedCodebook { seq: s.codebook_id.clone(), other: codebook_id.to_string() });
        }
        if s.window != window {
            return Err(Error::WindowMismatch { seq: s.window, requested: window });
        }
        if s.is_empty() {
            return Err(Error::InvalidOption("cannot write an empty token sequence".into()));
        }
        let line: Vec<String> = s.tokens.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    Ok(out.into_bytes())
}
