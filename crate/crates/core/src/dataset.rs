//! JSONL dataset persistence.
//!
//! One JSON object per line, field names exactly as in the type definitions.
//! Writers are single-owner: files are written to a temp path and renamed,
//! and nothing is written if any record fails its invariants.

use crate::types::{Instruction, InvariantError, Passage, PreferencePair, Response};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed JSON: {message}")]
    MalformedLine { path: String, line: usize, message: String },
    #[error("{path}:{line}: schema violation: {message}")]
    SchemaViolation { path: String, line: usize, message: String },
    #[error("{path}:{line}: duplicate id {id}")]
    DuplicateId { path: String, line: usize, id: String },
    #[error("record invariant violated, nothing written: {0}")]
    InvalidRecord(#[from] InvariantError),
}

/// A JSONL-persistable record with an id and self-check.
pub trait Record: Serialize + DeserializeOwned {
    /// Whether ids must be unique within one file. Pair-style rows where the
    /// same response legitimately appears many times opt out.
    const UNIQUE_IDS: bool = true;

    fn record_id(&self) -> &str;
    fn check(&self) -> Result<(), InvariantError>;
}

impl Record for Instruction {
    fn record_id(&self) -> &str {
        &self.id
    }
    fn check(&self) -> Result<(), InvariantError> {
        self.validate()
    }
}

impl Record for Response {
    fn record_id(&self) -> &str {
        &self.id
    }
    fn check(&self) -> Result<(), InvariantError> {
        self.validate()
    }
}

impl Record for Passage {
    fn record_id(&self) -> &str {
        &self.doc_id
    }
    fn check(&self) -> Result<(), InvariantError> {
        self.validate()
    }
}

impl Record for PreferencePair {
    // The same response may be positive in many pairs (enumeration).
    const UNIQUE_IDS: bool = false;

    fn record_id(&self) -> &str {
        &self.positive_id
    }
    fn check(&self) -> Result<(), InvariantError> {
        self.validate()
    }
}

/// Load a JSONL dataset, rejecting duplicate ids and reporting failing lines.
pub fn load_dataset<T: Record>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let p = path.display().to_string();
    let file = fs::File::open(path).map_err(|source| DatasetError::Io { path: p.clone(), source })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| DatasetError::Io { path: p.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| DatasetError::MalformedLine {
            path: p.clone(),
            line: line_no,
            message: e.to_string(),
        })?;
        record.check().map_err(|e| DatasetError::SchemaViolation {
            path: p.clone(),
            line: line_no,
            message: e.to_string(),
        })?;
        if T::UNIQUE_IDS && !seen.insert(record.record_id().to_string()) {
            return Err(DatasetError::DuplicateId {
                path: p.clone(),
                line: line_no,
                id: record.record_id().to_string(),
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Serialize records to JSONL. Validates everything first; on any invariant
/// violation nothing is written. Output is byte-stable for equal inputs.
pub fn save_dataset<T: Record>(records: &[T], path: &Path) -> Result<(), DatasetError> {
    let bytes = to_jsonl(records)?;
    write_atomic(path, &bytes)
}

/// Render records as JSONL bytes without touching the filesystem.
pub fn to_jsonl<T: Record>(records: &[T]) -> Result<Vec<u8>, DatasetError> {
    for r in records {
        r.check()?;
    }
    let mut out = Vec::new();
    for r in records {
        // Field order follows the struct declaration, so this is deterministic.
        serde_json::to_writer(&mut out, r).expect("serialization of validated record");
        out.push(b'\n');
    }
    Ok(out)
}

/// Write bytes via a temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let p = path.display().to_string();
    let io_err = |source| DatasetError::Io { path: p.clone(), source };
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(io_err)?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(bytes).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}
