//! Content-addressed response cache, persisted as JSON Lines.
//!
//! Reads go through an `RwLock`; inserts queue under a `Mutex` and are
//! appended to disk in key order by [`ExtractionCache::persist`], so the
//! file contents do not depend on worker scheduling.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ExtractionError;
use crate::model::{ExtractionRecord, SubjectKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseOutcome {
    Record(ExtractionRecord),
    Failure(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawExtractionResponse {
    pub key: String,
    pub subject_kind: SubjectKind,
    pub subject_id: String,
    pub raw_text: String,
    pub parsed: ParseOutcome,
    pub attempts: u32,
}

impl RawExtractionResponse {
    pub fn record(&self) -> Option<&ExtractionRecord> {
        match &self.parsed {
            ParseOutcome::Record(r) => Some(r),
            ParseOutcome::Failure(_) => None,
        }
    }
}

/// Hex SHA-256 of length-prefixed parts, so `["ab", "c"]` and `["a", "bc"]`
/// hash differently.
pub fn content_key(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    hex::encode(hasher.finalize())
}

pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Default)]
pub struct ExtractionCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, RawExtractionResponse>>,
    pending: Mutex<Vec<RawExtractionResponse>>,
}

impl ExtractionCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or starts) the cache at `path`. A missing file is an empty
    /// cache; an unparseable line is an error naming the file.
    pub fn open(path: &Path) -> Result<Self, ExtractionError> {
        let mut entries = HashMap::new();
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|source| ExtractionError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let entry: RawExtractionResponse =
                    serde_json::from_str(line).map_err(|e| ExtractionError::CorruptCache {
                        path: path.to_path_buf(),
                        message: format!("line {}: {e}", i + 1),
                    })?;
                entries.insert(entry.key.clone(), entry);
            }
        }
        Ok(ExtractionCache {
            path: Some(path.to_path_buf()),
            entries: RwLock::new(entries),
            pending: Mutex::new(Vec::new()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<RawExtractionResponse> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.read().expect("cache lock").contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stores a successful response. Failures are never cached so that a
    /// later run retries them.
    pub fn insert(&self, entry: RawExtractionResponse) {
        if entry.record().is_none() {
            return;
        }
        let mut entries = self.entries.write().expect("cache lock");
        if entries.contains_key(&entry.key) {
            return;
        }
        entries.insert(entry.key.clone(), entry.clone());
        self.pending.lock().expect("cache lock").push(entry);
    }

    /// Appends queued entries to the backing file in key order.
    pub fn persist(&self) -> Result<(), ExtractionError> {
        let Some(path) = &self.path else {
            self.pending.lock().expect("cache lock").clear();
            return Ok(());
        };
        let mut pending = std::mem::take(&mut *self.pending.lock().expect("cache lock"));
        if pending.is_empty() {
            return Ok(());
        }
        pending.sort_by(|a, b| a.key.cmp(&b.key));
        let io_err = |source| ExtractionError::Io {
            path: path.clone(),
            source,
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err)?;
        let mut buf = String::new();
        for entry in &pending {
            buf.push_str(&serde_json::to_string(entry).expect("cache entry serializes"));
            buf.push('\n');
        }
        file.write_all(buf.as_bytes()).map_err(io_err)
    }
}
