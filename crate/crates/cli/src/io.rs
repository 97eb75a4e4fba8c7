//! CSV readers and writers for observation matrices, embeddings, spectra,
//! and metric pair tables.
//!
//! All files are UTF-8 with a header row, `.` decimal points, and one
//! sample per row. Floats are written with Rust's shortest round-trip
//! formatting, so identical values always produce identical bytes.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use comvar::analysis::Spectrum;
use comvar::diffusion::DiffusionEmbedding;
use comvar::numerics::DataMatrix;

/// Reads a numeric CSV with a header row into a samples-by-dims matrix.
/// Errors carry the file name plus the 1-based line and column of the
/// offending field.
pub fn read_matrix_csv(path: &Path) -> Result<DataMatrix> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {display}"))?;
    let width = reader
        .headers()
        .with_context(|| format!("{display}: cannot read header line"))?
        .len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // line 1 is the header
        let record = record.with_context(|| format!("{display} line {line}: malformed CSV"))?;
        if record.len() != width {
            bail!(
                "{display} line {line}: expected {width} fields, found {}",
                record.len()
            );
        }
        let mut row = Vec::with_capacity(width);
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().with_context(|| {
                format!(
                    "{display} line {line}, column {}: invalid number {field:?}",
                    col + 1
                )
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{display}: no data rows after the header");
    }
    DataMatrix::from_rows(&rows).with_context(|| format!("{display}: invalid matrix"))
}

fn write_lines(path: &Path, header: &str, lines: impl Iterator<Item = String>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create directory {}", dir.display()))?;
    }
    let mut out = String::with_capacity(4096);
    out.push_str(header);
    out.push('\n');
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

fn join_floats(values: impl Iterator<Item = f64>) -> String {
    let mut line = String::new();
    for (i, v) in values.enumerate() {
        if i > 0 {
            line.push(',');
        }
        line.push_str(&format!("{v}"));
    }
    line
}

/// Writes a samples-by-dims matrix with header `<prefix>1..<prefix>d`.
pub fn write_matrix_csv(path: &Path, m: &DataMatrix, prefix: &str) -> Result<()> {
    let header = (1..=m.dim())
        .map(|c| format!("{prefix}{c}"))
        .collect::<Vec<_>>()
        .join(",");
    let values = m.values();
    write_lines(
        path,
        &header,
        (0..m.n_samples()).map(|i| join_floats(values.row(i).iter().copied())),
    )
}

/// Writes embedding coordinates as `index,psi1..psid`.
pub fn write_embedding_csv(path: &Path, emb: &DiffusionEmbedding) -> Result<()> {
    let d = emb.coordinates().ncols();
    let mut header = String::from("index");
    for c in 1..=d {
        header.push_str(&format!(",psi{c}"));
    }
    let coords = emb.coordinates();
    write_lines(
        path,
        &header,
        (0..coords.nrows()).map(|i| {
            let mut line = format!("{i}");
            for c in 0..d {
                line.push(',');
                line.push_str(&format!("{}", coords[(i, c)]));
            }
            line
        }),
    )
}

/// Writes a one-sided magnitude spectrum as `frequency,magnitude`.
pub fn write_spectrum_csv(path: &Path, s: &Spectrum) -> Result<()> {
    write_lines(
        path,
        "frequency,magnitude",
        s.frequencies()
            .iter()
            .zip(s.magnitudes())
            .map(|(f, m)| format!("{f},{m}")),
    )
}

/// Writes per-pair metric comparisons as `true_sq_dist,midpoint,endpoint`.
pub fn write_pairs_csv(path: &Path, rows: &[[f64; 3]]) -> Result<()> {
    write_lines(
        path,
        "true_sq_dist,midpoint,endpoint",
        rows.iter().map(|r| join_floats(r.iter().copied())),
    )
}
