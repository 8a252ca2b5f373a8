use std::io::{Read, Write};
use std::path::Path as FsPath;

use super::{Interpolation, Path, SampledPath};
use crate::error::{Error, Result};

/// Formats a number with 17 significant digits (round-trips any `f64`).
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads a path from CSV with header `t,<p>1,...,<p>d`.
pub fn read_csv(path: impl AsRef<FsPath>, interpolation: Interpolation) -> Result<SampledPath> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv_from(file, interpolation)
}

pub fn read_csv_from(reader: impl Read, interpolation: Interpolation) -> Result<SampledPath> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("t") || headers.len() < 2 {
        return Err(Error::InvalidPath(format!(
            "expected header `t,x1,...,xd`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let dim = headers.len() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let mut fields = record.iter().map(|f| {
            f.parse::<f64>()
                .map_err(|e| Error::InvalidPath(format!("row {}: `{f}`: {e}", row + 1)))
        });
        times.push(fields.next().transpose()?.unwrap_or(f64::NAN));
        for _ in 0..dim {
            values.push(fields.next().transpose()?.ok_or_else(|| {
                Error::InvalidPath(format!("row {}: expected {} columns", row + 1, dim + 1))
            })?);
        }
    }
    SampledPath::from_flat(times, values, dim, interpolation)
}

/// Writes any path as CSV; column names are `t,<prefix>1,...`.
pub fn write_csv(path: &dyn Path, prefix: &str, out: impl AsRef<FsPath>) -> Result<()> {
    let file = std::fs::File::create(out.as_ref())?;
    write_csv_to(path, prefix, std::io::BufWriter::new(file))
}

pub fn write_csv_to(path: &dyn Path, prefix: &str, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=path.dim()).map(|k| format!("{prefix}{k}")));
    w.write_record(&header)?;
    for (i, &t) in path.times().iter().enumerate() {
        let mut row = vec![format_number(t)];
        row.extend((0..path.dim()).map(|k| format_number(path.node(i, k))));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
