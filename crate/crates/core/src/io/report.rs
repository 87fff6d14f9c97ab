use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::metrics::{CorpusReport, EnsembleReport, PAIRWISE_RMSD_AGGREGATE, W2_ESTIMATOR};

/// Marker written in place of a metric that is undefined for its input.
pub const UNDEFINED: &str = "undefined";

const COLUMNS: [&str; 9] = [
    "target",
    "per_target_rmsf_r",
    "mean_pairwise_rmsd_generated",
    "mean_pairwise_rmsd_reference",
    "md_pca_w2",
    "joint_pca_w2",
    "residue_ids",
    "rmsf_generated",
    "rmsf_reference",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| x.to_string())
}

fn list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn metadata(n_components: usize) -> String {
    format!("# w2_estimator={W2_ESTIMATOR}\n# pairwise_rmsd_aggregate={PAIRWISE_RMSD_AGGREGATE}\n# n_components={n_components}\n")
}

/// One row per target. Per-residue vectors are space-separated inside a cell.
pub fn reports_to_csv(reports: &[EnsembleReport], n_components: usize) -> Result<Vec<u8>> {
    let mut out = metadata(n_components).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let io_err = |e: csv::Error| Error::InvalidOption(e.to_string());
        w.write_record(COLUMNS).map_err(io_err)?;
        for r in reports {
            w.write_record([
                r.target.clone(),
                opt(r.per_target_rmsf_r),
                r.mean_pairwise_rmsd_generated.to_string(),
                r.mean_pairwise_rmsd_reference.to_string(),
                opt(r.md_pca_w2),
                opt(r.joint_pca_w2),
                list(&r.residue_ids),
                list(&r.rmsf_generated),
                list(&r.rmsf_reference),
            ])
            .map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::InvalidOption(e.to_string()))?;
    }
    Ok(out)
}

fn number(text: &str, line: usize, column: &str) -> Result<f64> {
    text.parse::<f64>()
        .map_err(|_| Error::MalformedRecord { line, reason: format!("{column}: '{text}' is not a number") })
}

fn optional(text: &str, line: usize, column: &str) -> Result<Option<f64>> {
    if text == UNDEFINED {
        Ok(None)
    } else {
        number(text, line, column).map(Some)
    }
}

fn numbers(text: &str, line: usize, column: &str) -> Result<Vec<f64>> {
    text.split_whitespace().map(|t| number(t, line, column)).collect()
}

/// Reads a table written by [`reports_to_csv`].
pub fn parse_reports_csv(bytes: &[u8]) -> Result<Vec<EnsembleReport>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| Error::MalformedRecord { line: 1, reason: e.to_string() })?
        .clone();
    if !header.iter().eq(COLUMNS) {
        return Err(Error::MalformedRecord { line: 1, reason: format!("expected header '{}'", COLUMNS.join(",")) });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::MalformedRecord { line, reason: e.to_string() }
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let f = |i: usize| record.get(i).unwrap_or("");
        let report = EnsembleReport {
            target: f(0).to_string(),
            per_target_rmsf_r: optional(f(1), line, COLUMNS[1])?,
            mean_pairwise_rmsd_generated: number(f(2), line, COLUMNS[2])?,
            mean_pairwise_rmsd_reference: number(f(3), line, COLUMNS[3])?,
            md_pca_w2: optional(f(4), line, COLUMNS[4])?,
            joint_pca_w2: optional(f(5), line, COLUMNS[5])?,
            residue_ids: f(6).split_whitespace().map(str::to_string).collect(),
            rmsf_generated: numbers(f(7), line, COLUMNS[7])?,
            rmsf_reference: numbers(f(8), line, COLUMNS[8])?,
        };
        let n = report.residue_ids.len();
        if report.rmsf_generated.len() != n || report.rmsf_reference.len() != n {
            return Err(Error::MalformedRecord { line, reason: "per-residue columns differ in length".into() });
        }
        out.push(report);
    }
    Ok(out)
}

fn json_opt(v: Option<f64>) -> Value {
    v.map_or_else(|| Value::from(UNDEFINED), Value::from)
}

/// One JSON object per line, keys named after the report fields.
pub fn reports_to_jsonl(reports: &[EnsembleReport]) -> Vec<u8> {
    let mut out = String::new();
    for r in reports {
        let v = json!({
            "target": r.target,
            "per_target_rmsf_r": json_opt(r.per_target_rmsf_r),
            "mean_pairwise_rmsd_generated": r.mean_pairwise_rmsd_generated,
            "mean_pairwise_rmsd_reference": r.mean_pairwise_rmsd_reference,
            "md_pca_w2": json_opt(r.md_pca_w2),
            "joint_pca_w2": json_opt(r.joint_pca_w2),
            "residue_ids": r.residue_ids,
            "rmsf_generated": r.rmsf_generated,
            "rmsf_reference": r.rmsf_reference,
        });
        let _ = writeln!(out, "{v}");
    }
    out.into_bytes()
}

/// `metric,value` rows for a corpus summary.
pub fn corpus_report_csv(c: &CorpusReport, n_components: usize) -> Vec<u8> {
    let mut out = metadata(n_components);
    out.push_str("metric,value\n");
    let _ = writeln!(out, "n_targets,{}", c.n_targets);
    for (name, v) in [
        ("median_per_target_rmsf_r", c.median_per_target_rmsf_r),
        ("pairwise_rmsd_r", c.pairwise_rmsd_r),
        ("global_rmsf_r", c.global_rmsf_r),
        ("median_md_pca_w2", c.median_md_pca_w2),
        ("median_joint_pca_w2", c.median_joint_pca_w2),
    ] {
        let _ = writeln!(out, "{name},{}", opt(v));
    }
    out.into_bytes()
}

/// Long-format per-residue RMSF table for plotting.
pub fn rmsf_profile_csv(reports: &[EnsembleReport]) -> Vec<u8> {
    let mut out = String::from("target,residue_id,rmsf_generated,rmsf_reference\n");
    for r in reports {
        for ((id, g), f) in r.residue_ids.iter().zip(&r.rmsf_generated).zip(&r.rmsf_reference) {
            let _ = writeln!(out, "{},{id},{g},{f}", r.target);
        }
    }
    out.into_bytes()
}
