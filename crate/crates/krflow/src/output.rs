//! Output emission: diagnostics CSV/JSONL, trajectory checkpoints, and the
//! run manifest. All emission is byte-deterministic for identical records.

use crate::error::CliError;
use crate::flow::{DiagnosticsRecord, Termination};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

/// One emitted file with its content digest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

/// Headline numbers of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Headline {
    pub final_e1: Option<f64>,
    pub final_pinch: Option<f64>,
    pub alpha: Option<f64>,
}

/// Reproducibility manifest, written exactly once and last.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: serde_json::Value,
    pub code_version: String,
    /// Unix seconds.
    pub start_time: f64,
    pub end_time: f64,
    pub termination: serde_json::Value,
    pub files: Vec<FileEntry>,
    pub headline: Headline,
    pub steps_taken: usize,
}

fn sha256_hex(data: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(data);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<FileEntry, CliError> {
    let path = dir.join(name);
    fs::write(&path, content)?;
    Ok(FileEntry { name: name.to_string(), sha256: sha256_hex(content.as_bytes()) })
}

/// Stable CSV header for dimension `n`.
pub fn csv_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for prefix in ["e0", "j", "e"] {
        for k in 0..=n {
            cols.push(format!("{prefix}_{k}"));
        }
    }
    for name in [
        "l2_r",
        "cumulative_l2r",
        "c_t",
        "grad_phidot",
        "bisec_min",
        "bisec_max",
        "diameter",
        "lambda1",
        "liyau_margin",
        "c0_psi",
        "c2_min",
        "c2_max",
        "calabi_s",
        "pinch",
        "lemma35",
        "gauge_lambda",
        "gauge_residual",
    ] {
        cols.push(name.to_string());
    }
    cols.join(",")
}

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

fn csv_row(r: &DiagnosticsRecord) -> String {
    let mut cols = vec![fmt(r.t)];
    for series in [&r.e0, &r.j, &r.e] {
        for v in series.iter() {
            cols.push(fmt(*v));
        }
    }
    for v in [
        r.l2_r,
        r.cumulative_l2r,
        r.c_t,
        r.grad_phidot,
        r.bisec_min,
        r.bisec_max,
        r.diameter,
        r.lambda1,
        r.liyau_margin,
        r.c0_psi,
        r.c2_min,
        r.c2_max,
        r.calabi_s,
        r.pinch,
        r.lemma35,
        r.gauge_lambda,
        r.gauge_residual,
    ] {
        cols.push(fmt(v));
    }
    cols.join(",")
}

/// Renders the diagnostics CSV (header + one row per record).
pub fn render_csv(n: usize, records: &[DiagnosticsRecord]) -> String {
    let mut out = csv_header(n);
    out.push('\n');
    for r in records {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

/// Renders the diagnostics JSONL (one JSON object per record, stable field
/// order from the record struct).
pub fn render_jsonl(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Writes the diagnostics series and checkpoints; returns the file entries.
pub fn emit_series(
    n: usize,
    records: &[DiagnosticsRecord],
    checkpoints: &[(usize, String)],
    dir: &Path,
) -> Result<Vec<FileEntry>, CliError> {
    let mut files = Vec::new();
    files.push(write_file(dir, "diagnostics.csv", &render_csv(n, records))?);
    files.push(write_file(dir, "diagnostics.jsonl", &render_jsonl(records))?);
    for (index, text) in checkpoints {
        files.push(write_file(dir, &format!("checkpoint_{index:06}.profile.txt"), text)?);
    }
    Ok(files)
}

/// Writes the manifest (last, exactly once).
pub fn write_manifest(manifest: &RunManifest, dir: &Path) -> Result<PathBuf, CliError> {
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, text)?;
    Ok(path)
}

/// Maps a termination to the manifest's reason value.
pub fn termination_value(t: &Termination) -> serde_json::Value {
    match t {
        Termination::Converged => serde_json::json!("converged"),
        Termination::TFinal => serde_json::json!("t_final"),
        Termination::Error(msg) => serde_json::json!({ "error": msg }),
    }
}

/// Verifies the digests recorded in a manifest against the files on disk.
pub fn verify_manifest(dir: &Path) -> Result<(RunManifest, Vec<String>), CliError> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| CliError::ParseError(e.to_string()))?;
    let mut mismatches = Vec::new();
    for f in &manifest.files {
        match fs::read(dir.join(&f.name)) {
            Ok(data) => {
                if sha256_hex(&data) != f.sha256 {
                    mismatches.push(format!("{}: digest mismatch", f.name));
                }
            }
            Err(_) => mismatches.push(format!("{}: missing", f.name)),
        }
    }
    Ok((manifest, mismatches))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            e0: vec![0.0, 1.0],
            j: vec![0.0, 0.5],
            e: vec![0.0, 0.5],
            l2_r: 0.1,
            cumulative_l2r: 0.2,
            c_t: 0.0,
            grad_phidot: 1e-3,
            bisec_min: 0.1,
            bisec_max: 1.0,
            diameter: 3.14,
            lambda1: 1.0,
            liyau_margin: 0.75,
            c0_psi: 0.01,
            c2_min: 0.9,
            c2_max: 1.1,
            calabi_s: 0.0,
            pinch: 0.05,
            lemma35: 1e-9,
            gauge_lambda: 0.0,
            gauge_residual: 0.0,
        }
    }

    #[test]
    fn empty_records_give_header_only_csv() {
        let csv = render_csv(1, &[]);
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("t,e0_0,e0_1,j_0,j_1,e_0,e_1,l2_r,"));
    }

    #[test]
    fn two_records_two_rows_and_stable_digest() {
        let recs = vec![record(0.0), record(0.1)];
        let csv1 = render_csv(1, &recs);
        let csv2 = render_csv(1, &recs);
        assert_eq!(csv1.lines().count(), 3);
        assert_eq!(sha256_hex(csv1.as_bytes()), sha256_hex(csv2.as_bytes()));
        let header_cols = csv1.lines().next().unwrap().split(',').count();
        let row_cols = csv1.lines().nth(1).unwrap().split(',').count();
        assert_eq!(header_cols, row_cols);
    }
}
