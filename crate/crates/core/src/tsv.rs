//! Tab-separated file plumbing: comment-aware line reading and atomic writes.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// A data line of a TSV file, with its 1-based line number for error reporting.
#[derive(Debug)]
pub struct Record {
    pub line_no: usize,
    pub fields: Vec<String>,
}

/// Read a TSV file, skipping blank lines and `#`-prefixed comments.
///
/// Each surviving line must split into exactly `arity` tab-separated fields.
pub fn read_records(path: &Path, arity: usize) -> Result<Vec<Record>> {
    let file = File::open(path).map_err(|e| {
        Error::Data(format!("cannot open {}: {}", path.display(), e))
    })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<String> = trimmed.split('\t').map(str::to_string).collect();
        if fields.len() != arity {
            return Err(Error::Ingest {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("expected {} tab-separated fields, got {}", arity, fields.len()),
            });
        }
        records.push(Record {
            line_no: idx + 1,
            fields,
        });
    }
    Ok(records)
}

/// Make an ingestion error at a specific line of a file.
pub fn ingest_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Write `contents` to `path` atomically (write a sibling temp file, then rename).
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = tmp_path(path);
    {
        let mut file = File::create(&tmp)?;
        file.write_all(contents.as_bytes())?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Fixed formatting for fractional values in TSV outputs: 9 decimal digits.
pub fn fmt_value(v: f64) -> String {
    format!("{v:.9}")
}
