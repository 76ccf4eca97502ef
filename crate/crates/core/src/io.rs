//! Signal CSV files, vertex metadata and audit logs.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::VertexMeta;
use crate::selector::IterationRecord;
use crate::spectral::SignalMatrix;

/// Formats a float with 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes an N x p signal with header `f0,f1,...`.
pub fn write_signal(path: impl AsRef<Path>, z: &SignalMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let header: Vec<String> = (0..z.ncols()).map(|j| format!("f{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in z.row_iter() {
        let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a signal CSV. Every row must be complete and every value finite.
pub fn read_signal(path: impl AsRef<Path>) -> Result<SignalMatrix> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let p = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .len();
    if p == 0 {
        return Err(Error::parse(path, 1, "empty header"));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
        if rec.len() != p {
            return Err(Error::parse(path, line, format!("expected {p} columns, found {}", rec.len())));
        }
        for cell in rec.iter() {
            let x: f64 = cell
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad number {cell:?}")))?;
            if !x.is_finite() {
                return Err(Error::parse(path, line, format!("non-finite value {cell:?}")));
            }
            values.push(x);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::parse(path, 1, "no data rows"));
    }
    Ok(SignalMatrix::from_row_slice(rows, p, &values))
}

/// Reads a real matrix from a header-less CSV (features or distances).
pub fn read_matrix(path: impl AsRef<Path>) -> Result<SignalMatrix> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::parse(path, line, format!("expected {w} columns, found {}", rec.len())))
            }
            _ => {}
        }
        for cell in rec.iter() {
            let x: f64 = cell
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad number {cell:?}")))?;
            if !x.is_finite() {
                return Err(Error::parse(path, line, format!("non-finite value {cell:?}")));
            }
            values.push(x);
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| Error::parse(path, 1, "empty matrix"))?;
    Ok(SignalMatrix::from_row_slice(rows, width, &values))
}

/// Vertex metadata: a JSON array with one string-valued object per vertex.
pub fn read_meta(path: impl AsRef<Path>) -> Result<Vec<VertexMeta>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn write_meta(path: impl AsRef<Path>, meta: &[VertexMeta]) -> Result<()> {
    let path = path.as_ref();
    let bytes = serde_json::to_vec_pretty(meta)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// JSON-lines audit log, one record per iteration.
pub fn write_log<W: Write>(mut out: W, log: &[IterationRecord]) -> Result<()> {
    for rec in log {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n").map_err(|e| Error::io("<audit log>", e))?;
    }
    Ok(())
}

pub fn write_log_file(path: impl AsRef<Path>, log: &[IterationRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_log(&mut w, log)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_log_file(path: impl AsRef<Path>) -> Result<Vec<IterationRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}
