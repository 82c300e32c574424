//! Numeric CSV ingestion.

use std::io::Read;
use std::path::Path;

use fssd_core::Sample;

use crate::error::{HarnessError, Result};

/// Reads a numeric CSV file, one observation per row.
///
/// A first line with no parseable numbers is treated as a header and skipped.
/// Ragged rows, non-numeric cells and non-finite values are rejected with
/// the offending line number.
pub fn ingest_csv(path: &Path, expected_d: Option<usize>) -> Result<Sample> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, expected_d)
}

pub fn ingest_reader<R: Read>(reader: R, expected_d: Option<usize>) -> Result<Sample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut data = Vec::new();
    let mut d = expected_d;
    let mut first = true;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if first {
            first = false;
            if record.iter().all(|c| c.parse::<f64>().is_err()) {
                continue;
            }
        }
        let width = *d.get_or_insert(record.len());
        if record.len() != width {
            return Err(HarnessError::Ingest { line, msg: format!("expected {width} columns, found {}", record.len()) });
        }
        for cell in record.iter() {
            let v: f64 = cell
                .parse()
                .map_err(|_| HarnessError::Ingest { line, msg: format!("non-numeric cell {cell:?}") })?;
            if !v.is_finite() {
                return Err(HarnessError::Ingest { line, msg: format!("non-finite value {cell:?}") });
            }
            data.push(v);
        }
    }
    let d = d.ok_or_else(|| HarnessError::Ingest { line: 0, msg: "no data rows".into() })?;
    Ok(Sample::new(data, d)?)
}

/// Writes a sample as a headerless numeric CSV.
pub fn write_csv(sample: &Sample, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in sample.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
