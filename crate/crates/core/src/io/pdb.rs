use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::RangeInclusive;

use crate::ensemble::{Ensemble, Residue, Source};
use crate::error::{Error, Result};
use crate::geom::{Chain, Point};

/// Which chain and models to read. Alternate locations always resolve to
/// blank first, then `A`, then whichever record came first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StructureFileOptions {
    /// `None` selects the first chain that has a Cα atom.
    pub chain_id: Option<char>,
    /// Inclusive range of MODEL serial numbers to keep.
    pub model_range: Option<RangeInclusive<i64>>,
}

impl StructureFileOptions {
    pub fn validate(&self) -> Result<()> {
        match &self.model_range {
            Some(r) if r.start() > r.end() => {
                Err(Error::InvalidOption(format!("model range {}..={} is empty", r.start(), r.end())))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct ResidueKey {
    seq: i32,
    icode: char,
}

struct Atom {
    priority: u8,
    name: String,
    pos: Point,
}

struct Model {
    serial: i64,
    atoms: BTreeMap<ResidueKey, Atom>,
}

fn field(line: &str, lineno: usize, cols: std::ops::Range<usize>, what: &str) -> Result<String> {
    line.get(cols.clone())
        .map(str::to_string)
        .ok_or_else(|| Error::MalformedRecord {
            line: lineno,
            reason: format!("{what} (columns {}-{}) missing", cols.start + 1, cols.end),
        })
}

fn column_char(line: &str, col: usize) -> char {
    line.as_bytes().get(col).map_or(' ', |&b| b as char)
}

fn parse_coord(line: &str, lineno: usize, cols: std::ops::Range<usize>, axis: &str) -> Result<f64> {
    let text = field(line, lineno, cols, axis)?;
    match text.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::MalformedRecord { line: lineno, reason: format!("{axis} coordinate '{}' is not a number", text.trim()) }),
    }
}

fn altloc_priority(c: char) -> u8 {
    match c {
        ' ' => 0,
        'A' => 1,
        _ => 2,
    }
}

/// Reads Cα traces of one chain from fixed-column PDB text, one conformation
/// per MODEL block (or one for a file without MODEL records).
pub fn parse_structure(bytes: &[u8], opts: &StructureFileOptions) -> Result<Ensemble> {
    opts.validate()?;
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::MalformedRecord { line, reason: "not valid UTF-8".into() }
    })?;

    let mut models: Vec<Model> = Vec::new();
    let mut open: Option<Model> = None;
    let mut saw_model_record = false;
    let mut implicit = false;
    let mut chain = opts.chain_id;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let record = line.get(..6.min(line.len())).unwrap_or("");
        match record.trim_end() {
            "MODEL" => {
                if open.is_some() || implicit {
                    return Err(Error::MalformedRecord { line: lineno, reason: "MODEL inside an open model".into() });
                }
                let serial_text = line.get(10..).unwrap_or("").trim();
                let serial = serial_text.parse::<i64>().map_err(|_| Error::MalformedRecord {
                    line: lineno,
                    reason: format!("model serial '{serial_text}' is not an integer"),
                })?;
                saw_model_record = true;
                open = Some(Model { serial, atoms: BTreeMap::new() });
            }
            "ENDMDL" => match open.take() {
                Some(m) => models.push(m),
                None => return Err(Error::MalformedRecord { line: lineno, reason: "ENDMDL without MODEL".into() }),
            },
            "ATOM" => {
                if field(line, lineno, 12..16, "atom name")?.trim() != "CA" {
                    continue;
                }
                let chain_here = column_char(line, 21);
                match chain {
                    None => chain = Some(chain_here),
                    Some(c) if c != chain_here => continue,
                    Some(_) => {}
                }
                if open.is_none() {
                    if saw_model_record {
                        return Err(Error::MalformedRecord { line: lineno, reason: "ATOM outside a MODEL block".into() });
                    }
                    implicit = true;
                    open = Some(Model { serial: 1, atoms: BTreeMap::new() });
                }
                let seq_text = field(line, lineno, 22..26, "residue number")?;
                let seq = seq_text.trim().parse::<i32>().map_err(|_| Error::MalformedRecord {
                    line: lineno,
                    reason: format!("residue number '{}' is not an integer", seq_text.trim()),
                })?;
                let key = ResidueKey { seq, icode: column_char(line, 26) };
                let pos = Point::new(
                    parse_coord(line, lineno, 30..38, "x")?,
                    parse_coord(line, lineno, 38..46, "y")?,
                    parse_coord(line, lineno, 46..54, "z")?,
                );
                let atom = Atom {
                    priority: altloc_priority(column_char(line, 16)),
                    name: field(line, lineno, 17..20, "residue name")?.trim().to_string(),
                    pos,
                };
                let atoms = &mut open.as_mut().expect("model is open").atoms;
                match atoms.get(&key) {
                    Some(prev) if prev.priority <= atom.priority => {}
                    _ => {
                        atoms.insert(key, atom);
                    }
                }
            }
            _ => {}
        }
    }
    if let Some(m) = open {
        if !implicit {
            return Err(Error::MalformedRecord { line: text.lines().count(), reason: format!("MODEL {} never closed", m.serial) });
        }
        models.push(m);
    }
    if let Some(range) = &opts.model_range {
        models.retain(|m| range.contains(&m.serial));
    }
    let first = match models.first() {
        Some(m) if !m.atoms.is_empty() => m,
        _ => return Err(Error::NoCalpha { chain: opts.chain_id }),
    };
    for m in &models[1..] {
        if !m.atoms.keys().eq(first.atoms.keys()) {
            return Err(Error::InconsistentModels { first: first.serial, model: m.serial });
        }
    }
    let residues = first.atoms.iter().map(|(k, a)| Residue::new(k.seq, k.icode, a.name.clone())).collect();
    let chains = models
        .iter()
        .map(|m| Chain::new(format!("model_{}", m.serial), m.atoms.values().map(|a| a.pos).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::with_residues(chains, Source::Reference, residues, chain.unwrap_or('A'))
}

fn coord(v: f64) -> Result<String> {
    let s = format!("{v:8.3}");
    if s.len() > 8 || !v.is_finite() {
        return Err(Error::CoordinateOverflow(v));
    }
    Ok(s)
}

/// Multi-model Cα PDB text, one MODEL block per conformation.
pub fn write_structure(e: &Ensemble) -> Result<Vec<u8>> {
    let mut out = String::new();
    for (k, c) in e.conformations().iter().enumerate() {
        let _ = writeln!(out, "MODEL     {:>4}", k + 1);
        for (i, (p, r)) in c.coords().iter().zip(e.residues()).enumerate() {
            if !(-999..=9999).contains(&r.seq) {
                return Err(Error::InvalidOption(format!("residue number {} does not fit the PDB field", r.seq)));
            }
            let name: String = r.name.chars().take(3).collect();
            let _ = writeln!(
                out,
                "ATOM  {:>5}  CA  {:>3} {}{:>4}{}   {}{}{}  1.00  0.00           C",
                (i + 1) % 100_000,
                name,
                e.chain_id(),
                r.seq,
                r.icode,
                coord(p.x)?,
                coord(p.y)?,
                coord(p.z)?,
            );
        }
        out.push_str("ENDMDL\n");
    }
    out.push_str("END\n");
    Ok(out.into_bytes())
}
