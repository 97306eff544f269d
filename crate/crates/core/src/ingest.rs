//! Checkpoint and hint log ingestion.
//!
//! Logs are JSON Lines. Malformed rows never abort a load: they are kept in
//! [`Dataset::dropped`] with a machine-readable reason. Only an unreadable
//! file is fatal.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use chrono::{DateTime, Timelike, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::IngestError;
use crate::model::{Checkpoint, HintEvent, KcDatabase};

pub const DEFAULT_LINKAGE_WINDOW_SECONDS: i64 = 120;

pub const CHECKPOINTS_FILE: &str = "checkpoints.jsonl";
pub const HINTS_FILE: &str = "hints.jsonl";
pub const DATASET_META_FILE: &str = "dataset.json";

/// Identifies one stream: `(student_id, problem_id)`.
pub type StreamKey = (String, String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowSource {
    Checkpoints,
    Hints,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedRow {
    pub source: RowSource,
    /// 1-based line number in the source file.
    pub line: usize,
    pub record: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkedHint {
    pub hint: HintEvent,
    pub checkpoint_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct LoadSummary {
    pub rows: usize,
    pub ingested: usize,
    pub dropped: usize,
}

/// Optional metadata file stored next to the logs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DatasetMeta {
    #[serde(default)]
    pub term_label: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub db: KcDatabase,
    pub term_label: String,
    pub streams: BTreeMap<StreamKey, Vec<Checkpoint>>,
    pub hints: Vec<LinkedHint>,
    pub dropped: Vec<DroppedRow>,
    index: HashMap<String, (StreamKey, usize)>,
}

impl Dataset {
    pub fn new(db: KcDatabase, term_label: impl Into<String>) -> Self {
        Dataset {
            db,
            term_label: term_label.into(),
            streams: BTreeMap::new(),
            hints: Vec::new(),
            dropped: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn checkpoint(&self, checkpoint_id: &str) -> Option<&Checkpoint> {
        let (key, pos) = self.index.get(checkpoint_id)?;
        self.streams.get(key).map(|stream| &stream[*pos])
    }

    pub fn checkpoints(&self) -> impl Iterator<Item = &Checkpoint> {
        self.streams.values().flatten()
    }

    pub fn checkpoint_count(&self) -> usize {
        self.index.len()
    }

    /// Distinct problem ids in sorted order.
    pub fn problem_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.streams.keys().map(|(_, p)| p.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Ingests checkpoint rows from JSON Lines text.
    pub fn add_checkpoint_lines(&mut self, text: &str) -> LoadSummary {
        let mut summary = LoadSummary::default();
        // (checkpoint, input order) per stream before sorting
        let mut incoming: BTreeMap<StreamKey, Vec<(Checkpoint, usize)>> = BTreeMap::new();
        let mut keys_seen: HashSet<(String, String, DateTime<Utc>, i64)> = HashSet::new();
        let mut ids_seen: HashSet<String> = self.index.keys().cloned().collect();

        for (line_no, line) in non_blank_lines(text) {
            summary.rows += 1;
            match parse_checkpoint(line, &self.db.assignment_id) {
                Ok(cp) => {
                    if !ids_seen.insert(cp.checkpoint_id.clone()) {
                        self.drop_row(RowSource::Checkpoints, line_no, line,
                            format!("duplicate checkpoint_id: {}", cp.checkpoint_id));
                        summary.dropped += 1;
                        continue;
                    }
                    if let Some(seq) = cp.sequence_hint {
                        let key = (cp.student_id.clone(), cp.problem_id.clone(), cp.timestamp, seq);
                        if !keys_seen.insert(key) {
                            ids_seen.remove(&cp.checkpoint_id);
                            self.drop_row(RowSource::Checkpoints, line_no, line,
                                "duplicate (student_id, problem_id, timestamp, sequence_hint)".into());
                            summary.dropped += 1;
                            continue;
                        }
                    }
                    summary.ingested += 1;
                    let order = line_no;
                    incoming
                        .entry((cp.student_id.clone(), cp.problem_id.clone()))
                        .or_default()
                        .push((cp, order));
                }
                Err(reason) => {
                    self.drop_row(RowSource::Checkpoints, line_no, line, reason);
                    summary.dropped += 1;
                }
            }
        }

        for (key, mut rows) in incoming {
            let stream = self.streams.entry(key.clone()).or_default();
            // existing members keep their relative order ahead of new rows on ties
            let mut merged: Vec<(Checkpoint, usize)> =
                stream.drain(..).enumerate().map(|(i, cp)| (cp, i)).collect();
            let offset = merged.len();
            merged.extend(rows.drain(..).map(|(cp, order)| (cp, offset + order)));
            merged.sort_by(|(a, ia), (b, ib)| {
                a.timestamp
                    .cmp(&b.timestamp)
                    .then(seq_rank(a.sequence_hint).cmp(&seq_rank(b.sequence_hint)))
                    .then(ia.cmp(ib))
            });
            *stream = merged.into_iter().map(|(cp, _)| cp).collect();
            for (pos, cp) in stream.iter().enumerate() {
                self.index.insert(cp.checkpoint_id.clone(), (key.clone(), pos));
            }
        }
        summary
    }

    /// Ingests hint rows from JSON Lines text and links each one to a
    /// checkpoint. An explicit `checkpoint_ref` in the same stream wins;
    /// otherwise the latest checkpoint at or before the hint within
    /// `window_seconds` is used.
    pub fn add_hint_lines(&mut self, text: &str, window_seconds: i64) -> LoadSummary {
        let mut summary = LoadSummary::default();
        let mut ids_seen: HashSet<String> =
            self.hints.iter().map(|h| h.hint.hint_id.clone()).collect();

        for (line_no, line) in non_blank_lines(text) {
            summary.rows += 1;
            let outcome = parse_hint(line, &self.db.assignment_id).and_then(|hint| {
                if !ids_seen.insert(hint.hint_id.clone()) {
                    return Err(format!("duplicate hint_id: {}", hint.hint_id));
                }
                match self.link(&hint, window_seconds) {
                    Some(checkpoint_id) => Ok(LinkedHint { hint, checkpoint_id }),
                    None => {
                        ids_seen.remove(&hint.hint_id);
                        Err("no checkpoint within linkage window".to_string())
                    }
                }
            });
            match outcome {
                Ok(linked) => {
                    summary.ingested += 1;
                    self.hints.push(linked);
                }
                Err(reason) => {
                    self.drop_row(RowSource::Hints, line_no, line, reason);
                    summary.dropped += 1;
                }
            }
        }
        summary
    }

    fn link(&self, hint: &HintEvent, window_seconds: i64) -> Option<String> {
        if let Some(reference) = &hint.checkpoint_ref {
            if let Some(cp) = self.checkpoint(reference) {
                if cp.student_id == hint.student_id && cp.problem_id == hint.problem_id {
                    return Some(cp.checkpoint_id.clone());
                }
            }
        }
        let stream = self
            .streams
            .get(&(hint.student_id.clone(), hint.problem_id.clone()))?;
        let latest = stream.iter().rev().find(|cp| cp.timestamp <= hint.timestamp)?;
        let gap = (hint.timestamp - latest.timestamp).num_seconds();
        (gap <= window_seconds).then(|| latest.checkpoint_id.clone())
    }

    fn drop_row(&mut self, source: RowSource, line: usize, record: &str, reason: String) {
        self.dropped.push(DroppedRow {
            source,
            line,
            record: record.to_string(),
            reason,
        });
    }
}

fn seq_rank(sequence_hint: Option<i64>) -> (bool, i64) {
    // rows without a hint sort after hinted rows sharing their timestamp
    match sequence_hint {
        Some(seq) => (false, seq),
        None => (true, 0),
    }
}

fn non_blank_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.trim_end_matches('\r')))
        .filter(|(_, line)| !line.trim().is_empty())
}

fn parse_object(line: &str) -> Result<Map<String, Value>, String> {
    match serde_json::from_str::<Value>(line) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err("row is not a JSON object".into()),
        Err(e) => Err(format!("invalid JSON: {e}")),
    }
}

fn required_str(obj: &Map<String, Value>, field: &str) -> Result<String, String> {
    match obj.get(field) {
        None | Some(Value::Null) => Err(format!("missing field: {field}")),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(format!("invalid field: {field} (expected string)")),
    }
}

fn required_id(obj: &Map<String, Value>, field: &str) -> Result<String, String> {
    let value = required_str(obj, field)?;
    if value.trim().is_empty() {
        Err(format!("empty field: {field}"))
    } else {
        Ok(value)
    }
}

fn parse_timestamp(obj: &Map<String, Value>) -> Result<DateTime<Utc>, String> {
    let raw = required_str(obj, "timestamp")?;
    let parsed = DateTime::parse_from_rfc3339(&raw)
        .map_err(|e| format!("invalid timestamp: {raw} ({e})"))?
        .with_timezone(&Utc);
    Ok(parsed.with_nanosecond(0).expect("zero nanoseconds is valid"))
}

fn check_assignment(found: &str, expected: &str) -> Result<(), String> {
    if found == expected {
        Ok(())
    } else {
        Err(format!("assignment_id mismatch: expected {expected}, found {found}"))
    }
}

fn parse_checkpoint(line: &str, assignment_id: &str) -> Result<Checkpoint, String> {
    let obj = parse_object(line)?;
    let checkpoint_id = required_id(&obj, "checkpoint_id")?;
    let student_id = required_id(&obj, "student_id")?;
    let assignment = required_id(&obj, "assignment_id")?;
    let problem_id = required_id(&obj, "problem_id")?;
    let timestamp = parse_timestamp(&obj)?;
    let code = required_str(&obj, "code")?;
    let sequence_hint = match obj.get("sequence_hint") {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => Some(
            n.as_i64()
                .ok_or_else(|| "invalid field: sequence_hint (expected integer)".to_string())?,
        ),
        Some(_) => return Err("invalid field: sequence_hint (expected integer)".into()),
    };
    check_assignment(&assignment, assignment_id)?;
    Ok(Checkpoint {
        checkpoint_id,
        student_id,
        assignment_id: assignment,
        problem_id,
        timestamp,
        code,
        sequence_hint,
    })
}

fn parse_hint(line: &str, assignment_id: &str) -> Result<HintEvent, String> {
    let obj = parse_object(line)?;
    let hint_id = required_id(&obj, "hint_id")?;
    let student_id = required_id(&obj, "student_id")?;
    let assignment = required_id(&obj, "assignment_id")?;
    let problem_id = required_id(&obj, "problem_id")?;
    let timestamp = parse_timestamp(&obj)?;
    let hint_text = required_str(&obj, "hint_text")?;
    if hint_text.trim().is_empty() {
        return Err("empty hint_text".into());
    }
    let checkpoint_ref = match obj.get("checkpoint_ref") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err("invalid field: checkpoint_ref (expected string)".into()),
    };
    check_assignment(&assignment, assignment_id)?;
    Ok(HintEvent {
        hint_id,
        student_id,
        assignment_id: assignment,
        problem_id,
        timestamp,
        hint_text,
        checkpoint_ref,
    })
}

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a checkpoint log into a fresh dataset.
pub fn load_checkpoints(
    path: &Path,
    db: &KcDatabase,
    term_label: &str,
) -> Result<(Dataset, LoadSummary), IngestError> {
    let text = read(path)?;
    let mut dataset = Dataset::new(db.clone(), term_label);
    let summary = dataset.add_checkpoint_lines(&text);
    Ok((dataset, summary))
}

/// Loads a hint log and links it against the checkpoints already in `dataset`.
pub fn load_hints(
    path: &Path,
    dataset: &mut Dataset,
    window_seconds: i64,
) -> Result<LoadSummary, IngestError> {
    let text = read(path)?;
    Ok(dataset.add_hint_lines(&text, window_seconds))
}

/// Successor of `checkpoint` within its stream, or `None` for the last one.
pub fn next_checkpoint<'a>(
    dataset: &'a Dataset,
    checkpoint: &Checkpoint,
) -> Result<Option<&'a Checkpoint>, IngestError> {
    let unknown = || IngestError::UnknownCheckpoint(checkpoint.checkpoint_id.clone());
    let (key, pos) = dataset.index.get(&checkpoint.checkpoint_id).ok_or_else(unknown)?;
    let stream = &dataset.streams[key];
    if stream[*pos] != *checkpoint {
        return Err(unknown());
    }
    Ok(stream.get(pos + 1))
}

/// Loads a dataset directory: `checkpoints.jsonl`, optional `hints.jsonl`
/// and optional `dataset.json` metadata. `term_override` beats the metadata;
/// the directory name is the last resort.
pub fn load_dataset_dir(
    dir: &Path,
    db: &KcDatabase,
    window_seconds: i64,
    term_override: Option<&str>,
) -> Result<(Dataset, LoadSummary, LoadSummary), IngestError> {
    let meta_path = dir.join(DATASET_META_FILE);
    let meta: DatasetMeta = if meta_path.exists() {
        serde_json::from_str(&read(&meta_path)?).unwrap_or_default()
    } else {
        DatasetMeta::default()
    };
    let term = term_override
        .map(str::to_string)
        .or(meta.term_label)
        .unwrap_or_else(|| {
            dir.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "term".into())
        });
    let (mut dataset, cp_summary) = load_checkpoints(&dir.join(CHECKPOINTS_FILE), db, &term)?;
    let hints_path = dir.join(HINTS_FILE);
    let hint_summary = if hints_path.exists() {
        load_hints(&hints_path, &mut dataset, window_seconds)?
    } else {
        LoadSummary::default()
    };
    Ok((dataset, cp_summary, hint_summary))
}
