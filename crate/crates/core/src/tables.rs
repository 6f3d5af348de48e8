//! Versioned CSV tables.
//!
//! Every CSV the toolkit writes starts with one schema line
//! `#schema=<name>/<version>` followed by the column header row. Readers
//! refuse files whose schema line differs from what they expect.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{path}: expected schema {expected:?}, found {found:?}")]
    Schema { path: String, expected: String, found: String },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: row {row}: {reason}")]
    Row { path: String, row: usize, reason: String },
}

pub fn schema_line(schema: &str) -> String {
    format!("#schema={schema}")
}

/// CSV writer positioned after the schema line and the header row. The
/// header is written even when no rows follow; `columns` must match the
/// field order of the rows serialized afterwards.
pub fn writer<W: Write>(mut out: W, schema: &str, columns: &[&str]) -> io::Result<csv::Writer<W>> {
    writeln!(out, "{}", schema_line(schema))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(columns)?;
    Ok(w)
}

/// Column names serde derives for `row`.
#[cfg(test)]
pub(crate) fn serde_columns<T: serde::Serialize>(row: &T) -> Vec<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(row).unwrap();
    let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
    text.lines().next().unwrap().split(',').map(String::from).collect()
}

/// Reads all rows of a versioned table.
pub fn read_rows<T: serde::de::DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>, TableError> {
    let p = path.display().to_string();
    let file = File::open(path).map_err(|source| TableError::Io { path: p.clone(), source })?;
    read_rows_from(BufReader::new(file), schema, &p)
}

pub fn read_rows_from<T: serde::de::DeserializeOwned, R: Read>(
    reader: R,
    schema: &str,
    label: &str,
) -> Result<Vec<T>, TableError> {
    let mut reader = BufReader::new(reader);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|source| TableError::Io { path: label.to_string(), source })?;
    let found = first.trim_end().to_string();
    let expected = schema_line(schema);
    if found != expected {
        return Err(TableError::Schema { path: label.to_string(), expected, found });
    }
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|source| TableError::Csv { path: label.to_string(), source })
}
