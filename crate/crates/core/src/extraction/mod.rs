//! KC extraction from code checkpoints and hints.
//!
//! An [`Extractor`] renders a prompt, sends it to a [`Backend`], and parses
//! the reply strictly against the KC database. Successful responses are
//! cached by content. A failed subject is reported, never defaulted to an
//! empty list: an empty missing list means "code complete".

pub mod cache;
pub mod parse;
pub mod prompt;
pub mod remote;
pub mod stub;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{BackendError, ExtractionError};
use crate::ingest::Dataset;
use crate::model::{Checkpoint, ExtractionRecord, HintEvent, KcDatabase, SubjectKind};

pub use cache::{ExtractionCache, ParseOutcome, RawExtractionResponse};
pub use parse::parse_response;
pub use prompt::Metadata;
pub use remote::RemoteBackend;
pub use stub::{stub_addressed_kcs, stub_missing_kcs, StubBackend, STUB_BACKEND_ID};

use cache::{content_key, text_hash};
use prompt::TemplateKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub backend: BackendKind,
    pub endpoint: Option<String>,
    pub model_name: String,
    pub temperature: f64,
    pub max_parallel: usize,
    /// Total attempts per subject, counting the first.
    pub retry_limit: u32,
    pub prompt_template_code: String,
    pub prompt_template_hint: String,
    pub prompt_template_judge: String,
    pub cache_path: Option<PathBuf>,
    pub api_key_env: String,
    pub auth_header: String,
    /// JSON pointer to the reply text in the backend's response body.
    pub response_text_pointer: String,
    pub timeout_seconds: u64,
    /// Optional problem statements, keyed by problem id, for prompt metadata.
    pub problem_statements: BTreeMap<String, String>,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            backend: BackendKind::Stub,
            endpoint: None,
            model_name: "gpt-4".into(),
            temperature: 0.0,
            max_parallel: 4,
            retry_limit: 2,
            prompt_template_code: prompt::DEFAULT_CODE_TEMPLATE.into(),
            prompt_template_hint: prompt::DEFAULT_HINT_TEMPLATE.into(),
            prompt_template_judge: prompt::DEFAULT_JUDGE_TEMPLATE.into(),
            cache_path: None,
            api_key_env: "KC_EVAL_API_KEY".into(),
            auth_header: "Authorization".into(),
            response_text_pointer: "/choices/0/message/content".into(),
            timeout_seconds: 60,
            problem_statements: BTreeMap::new(),
        }
    }
}

impl ExtractorConfig {
    pub fn validate(&self) -> Result<(), ExtractionError> {
        let bad = |msg: String| Err(ExtractionError::Config(msg));
        if !(self.temperature >= 0.0) {
            return bad(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if self.max_parallel < 1 {
            return bad("max_parallel must be >= 1".into());
        }
        if self.backend == BackendKind::Remote && self.endpoint.is_none() {
            return bad("remote backend requires an endpoint".into());
        }
        for (name, template, kind) in [
            ("prompt_template_code", &self.prompt_template_code, TemplateKind::Code),
            ("prompt_template_hint", &self.prompt_template_hint, TemplateKind::Hint),
            ("prompt_template_judge", &self.prompt_template_judge, TemplateKind::Judge),
        ] {
            let missing = prompt::missing_placeholders(template, kind);
            if !missing.is_empty() {
                return bad(format!(
                    "{name} lacks placeholders: {}",
                    missing.iter().map(|m| format!("{{{{{m}}}}}")).collect::<Vec<_>>().join(", ")
                ));
            }
        }
        Ok(())
    }

    fn attempts(&self) -> u32 {
        self.retry_limit.max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Code,
    Hint,
    Judge,
}

/// Everything a backend may look at. Remote backends only use `prompt`;
/// the stub reads the structured fields.
#[derive(Debug, Clone, Copy)]
pub struct BackendRequest<'a> {
    pub task: Task,
    pub prompt: &'a str,
    pub subject_text: &'a str,
    pub db: &'a KcDatabase,
    pub candidate: Option<&'a [String]>,
}

pub trait Backend: Send + Sync {
    /// Stable identifier, part of every cache key.
    fn id(&self) -> String;
    fn complete(&self, request: &BackendRequest<'_>) -> Result<String, BackendError>;
}

pub fn build_backend(config: &ExtractorConfig) -> Result<Box<dyn Backend>, ExtractionError> {
    config.validate()?;
    Ok(match config.backend {
        BackendKind::Stub => Box::new(StubBackend),
        BackendKind::Remote => Box::new(RemoteBackend::from_config(config)?),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionFailure {
    pub subject_kind: SubjectKind,
    pub subject_id: String,
    pub reason: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extracted {
    pub record: ExtractionRecord,
    pub from_cache: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeOutcome {
    pub record: ExtractionRecord,
    pub revised: bool,
    pub failure: Option<String>,
}

/// A subject to extract: its kind, id, text and problem.
#[derive(Debug, Clone, Copy)]
pub struct Subject<'a> {
    pub kind: SubjectKind,
    pub id: &'a str,
    pub text: &'a str,
    pub assignment_id: &'a str,
    pub problem_id: &'a str,
}

impl<'a> Subject<'a> {
    pub fn code(cp: &'a Checkpoint) -> Self {
        Subject {
            kind: SubjectKind::Code,
            id: &cp.checkpoint_id,
            text: &cp.code,
            assignment_id: &cp.assignment_id,
            problem_id: &cp.problem_id,
        }
    }

    pub fn hint(hint: &'a HintEvent) -> Self {
        Subject {
            kind: SubjectKind::Hint,
            id: &hint.hint_id,
            text: &hint.hint_text,
            assignment_id: &hint.assignment_id,
            problem_id: &hint.problem_id,
        }
    }
}

pub struct Extractor<'a> {
    db: &'a KcDatabase,
    config: &'a ExtractorConfig,
    backend: &'a dyn Backend,
    cache: &'a ExtractionCache,
    db_hash: String,
    backend_id: String,
    calls: AtomicUsize,
}

impl<'a> Extractor<'a> {
    pub fn new(
        db: &'a KcDatabase,
        config: &'a ExtractorConfig,
        backend: &'a dyn Backend,
        cache: &'a ExtractionCache,
    ) -> Self {
        Extractor {
            db,
            config,
            backend,
            cache,
            db_hash: db.content_hash(),
            backend_id: backend.id(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn db(&self) -> &KcDatabase {
        self.db
    }

    pub fn config(&self) -> &ExtractorConfig {
        self.config
    }

    /// Backend calls made so far (cache hits excluded).
    pub fn backend_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn metadata<'m>(&'m self, subject: &Subject<'m>) -> Metadata<'m> {
        Metadata {
            assignment_id: subject.assignment_id,
            problem_id: subject.problem_id,
            problem_statement: self
                .config
                .problem_statements
                .get(subject.problem_id)
                .map(String::as_str),
        }
    }

    fn template(&self, kind: SubjectKind) -> &str {
        match kind {
            SubjectKind::Code => &self.config.prompt_template_code,
            SubjectKind::Hint => &self.config.prompt_template_hint,
        }
    }

    pub fn cache_key(&self, subject: &Subject<'_>) -> String {
        content_key(&[
            "extract",
            subject.kind.as_str(),
            &text_hash(subject.text),
            &self.db_hash,
            &text_hash(self.template(subject.kind)),
            &self.backend_id,
            &text_hash(&self.metadata(subject).render()),
        ])
    }

    pub fn extract_code_kcs(&self, checkpoint: &Checkpoint) -> Result<ExtractionRecord, ExtractionFailure> {
        self.extract(&Subject::code(checkpoint)).map(|e| e.record)
    }

    pub fn extract_hint_kcs(&self, hint: &HintEvent) -> Result<ExtractionRecord, ExtractionFailure> {
        self.extract(&Subject::hint(hint)).map(|e| e.record)
    }

    pub fn extract(&self, subject: &Subject<'_>) -> Result<Extracted, ExtractionFailure> {
        let key = self.cache_key(subject);
        if let Some(record) = self.cache.get(&key).and_then(|hit| hit.record().cloned()) {
            return Ok(Extracted {
                record: ExtractionRecord {
                    subject_id: subject.id.to_string(),
                    ..record
                },
                from_cache: true,
            });
        }

        let meta = self.metadata(subject);
        let prompt = prompt::render_extraction_prompt(
            self.template(subject.kind),
            subject.kind,
            subject.text,
            self.db,
            &meta,
        );
        let request = BackendRequest {
            task: match subject.kind {
                SubjectKind::Code => Task::Code,
                SubjectKind::Hint => Task::Hint,
            },
            prompt: &prompt,
            subject_text: subject.text,
            db: self.db,
            candidate: None,
        };
        let (raw_text, mut record, attempts) =
            self.call_and_parse(&request, subject.kind).map_err(|(reason, attempts)| {
                ExtractionFailure {
                    subject_kind: subject.kind,
                    subject_id: subject.id.to_string(),
                    reason,
                    attempts,
                }
            })?;
        record.subject_id = subject.id.to_string();
        record.extractor_id = self.backend_id.clone();
        self.cache.insert(RawExtractionResponse {
            key,
            subject_kind: subject.kind,
            subject_id: subject.id.to_string(),
            raw_text,
            parsed: ParseOutcome::Record(record.clone()),
            attempts,
        });
        Ok(Extracted {
            record,
            from_cache: false,
        })
    }

    fn call_and_parse(
        &self,
        request: &BackendRequest<'_>,
        kind: SubjectKind,
    ) -> Result<(String, ExtractionRecord, u32), (String, u32)> {
        let max = self.config.attempts();
        let mut last = String::new();
        for attempt in 1..=max {
            self.calls.fetch_add(1, Ordering::SeqCst);
            match self.backend.complete(request) {
                Ok(raw) => match parse_response(&raw, self.db, kind) {
                    Ok(record) => return Ok((raw, record, attempt)),
                    Err(reason) => last = reason,
                },
                Err(e) => last = e.to_string(),
            }
            log::debug!("attempt {attempt}/{max} failed: {last}");
        }
        Err((last, max))
    }

    /// Second-pass validation of `record`. The judge either repeats the
    /// list (validated) or returns a revision. On failure the input record
    /// is returned unjudged.
    pub fn judge_record(&self, record: &ExtractionRecord, subject: &Subject<'_>) -> JudgeOutcome {
        let meta = self.metadata(subject);
        let key = content_key(&[
            "judge",
            record.subject_kind.as_str(),
            &text_hash(subject.text),
            &record.kc_ids.join("\n"),
            &self.db_hash,
            &text_hash(&self.config.prompt_template_judge),
            &self.backend_id,
            &text_hash(&meta.render()),
        ]);
        let judged = match self.cache.get(&key).and_then(|hit| hit.record().cloned()) {
            Some(hit) => Ok(hit),
            None => {
                let prompt = prompt::render_judge_prompt(
                    &self.config.prompt_template_judge,
                    record.subject_kind,
                    subject.text,
                    &record.kc_ids,
                    self.db,
                    &meta,
                );
                let request = BackendRequest {
                    task: Task::Judge,
                    prompt: &prompt,
                    subject_text: subject.text,
                    db: self.db,
                    candidate: Some(&record.kc_ids),
                };
                self.call_and_parse(&request, record.subject_kind).map(|(raw, parsed, attempts)| {
                    self.cache.insert(RawExtractionResponse {
                        key,
                        subject_kind: record.subject_kind,
                        subject_id: record.subject_id.clone(),
                        raw_text: raw,
                        parsed: ParseOutcome::Record(parsed.clone()),
                        attempts,
                    });
                    parsed
                })
            }
        };

        match judged {
            Ok(verdict) if verdict.kc_ids == record.kc_ids => JudgeOutcome {
                record: ExtractionRecord {
                    judged: true,
                    ..record.clone()
                },
                revised: false,
                failure: None,
            },
            Ok(verdict) => JudgeOutcome {
                record: ExtractionRecord {
                    kc_ids: verdict.kc_ids,
                    reasoning: verdict.reasoning,
                    judged: true,
                    ..record.clone()
                },
                revised: true,
                failure: None,
            },
            Err((reason, _)) => {
                log::warn!(
                    "judge failed for {} {}: {reason}; keeping the unjudged record",
                    record.subject_kind,
                    record.subject_id
                );
                JudgeOutcome {
                    record: record.clone(),
                    revised: false,
                    failure: Some(reason),
                }
            }
        }
    }
}

/// Extraction results keyed by subject, persisted as sorted JSON Lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractionStore {
    records: BTreeMap<(SubjectKind, String), ExtractionRecord>,
}

impl ExtractionStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, record: ExtractionRecord) {
        self.records
            .insert((record.subject_kind, record.subject_id.clone()), record);
    }

    pub fn get(&self, kind: SubjectKind, subject_id: &str) -> Option<&ExtractionRecord> {
        self.records.get(&(kind, subject_id.to_string()))
    }

    pub fn code(&self, checkpoint_id: &str) -> Option<&ExtractionRecord> {
        self.get(SubjectKind::Code, checkpoint_id)
    }

    pub fn hint(&self, hint_id: &str) -> Option<&ExtractionRecord> {
        self.get(SubjectKind::Hint, hint_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &ExtractionRecord> {
        self.records.values()
    }

    pub fn merge(&mut self, other: ExtractionStore) {
        self.records.extend(other.records);
    }

    /// Checks every record against `db`.
    pub fn validate(&self, db: &KcDatabase) -> Result<(), ExtractionError> {
        for record in self.records() {
            record
                .check(db)
                .map_err(|e| ExtractionError::Parse(format!("record {}: {e}", record.subject_id)))?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in self.records() {
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, ExtractionError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExtractionError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut store = ExtractionStore::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: ExtractionRecord =
                serde_json::from_str(line).map_err(|e| ExtractionError::CorruptCache {
                    path: path.to_path_buf(),
                    message: format!("line {}: {e}", i + 1),
                })?;
            store.insert(record);
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<(), ExtractionError> {
        std::fs::write(path, self.to_jsonl()).map_err(|source| ExtractionError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubjectSelection {
    Code,
    Hints,
    Both,
}

#[derive(Debug, Clone, Default)]
pub struct BatchOutcome {
    pub store: ExtractionStore,
    pub drops: Vec<ExtractionFailure>,
    pub backend_calls: usize,
    pub cache_hits: usize,
}

/// Runs `work` over `items` with at most `max_parallel` in flight, keeping
/// results in input order.
fn run_parallel<T: Sync, R: Send>(items: &[T], max_parallel: usize, work: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    let workers = max_parallel.max(1).min(items.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let out = work(&items[i]);
                results.lock().expect("results lock")[i] = Some(out);
            });
        }
    });
    results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

fn dataset_subjects(dataset: &Dataset, selection: SubjectSelection) -> Vec<Subject<'_>> {
    let mut subjects = Vec::new();
    if matches!(selection, SubjectSelection::Code | SubjectSelection::Both) {
        subjects.extend(dataset.checkpoints().map(Subject::code));
    }
    if matches!(selection, SubjectSelection::Hints | SubjectSelection::Both) {
        subjects.extend(dataset.hints.iter().map(|h| Subject::hint(&h.hint)));
    }
    subjects
}

/// Extracts every selected subject. Subjects sharing a cache key are sent
/// to the backend once. Only per-subject failures occur; they land in
/// `drops`. The cache is persisted before returning.
pub fn run_extraction_batch(
    dataset: &Dataset,
    extractor: &Extractor<'_>,
    selection: SubjectSelection,
) -> Result<BatchOutcome, ExtractionError> {
    let subjects = dataset_subjects(dataset, selection);
    let calls_before = extractor.backend_calls();

    let keys: Vec<String> = subjects.iter().map(|s| extractor.cache_key(s)).collect();
    let mut first_of_key: HashMap<&str, usize> = HashMap::new();
    let mut representatives = Vec::new();
    for (i, key) in keys.iter().enumerate() {
        first_of_key.entry(key.as_str()).or_insert_with(|| {
            representatives.push(i);
            i
        });
    }

    let results = run_parallel(&representatives, extractor.config.max_parallel, |&i| {
        extractor.extract(&subjects[i])
    });
    let by_rep: HashMap<usize, &Result<Extracted, ExtractionFailure>> =
        representatives.iter().copied().zip(results.iter()).collect();

    let mut outcome = BatchOutcome::default();
    for (i, subject) in subjects.iter().enumerate() {
        let rep = first_of_key[keys[i].as_str()];
        match by_rep[&rep] {
            Ok(extracted) => {
                if extracted.from_cache && rep == i {
                    outcome.cache_hits += 1;
                }
                outcome.store.insert(ExtractionRecord {
                    subject_id: subject.id.to_string(),
                    ..extracted.record.clone()
                });
            }
            Err(failure) => outcome.drops.push(ExtractionFailure {
                subject_id: subject.id.to_string(),
                ..failure.clone()
            }),
        }
    }
    outcome.backend_calls = extractor.backend_calls() - calls_before;
    extractor.cache.persist()?;
    Ok(outcome)
}

#[derive(Debug, Clone, Default)]
pub struct JudgeBatchOutcome {
    pub store: ExtractionStore,
    pub revised: usize,
    pub failures: Vec<ExtractionFailure>,
}

/// Runs the judge over every record in `store` whose subject is in
/// `dataset`. Records whose subject is unknown are kept as they are.
pub fn run_judge_batch(
    dataset: &Dataset,
    extractor: &Extractor<'_>,
    store: &ExtractionStore,
) -> Result<JudgeBatchOutcome, ExtractionError> {
    let hints: HashMap<&str, &HintEvent> = dataset
        .hints
        .iter()
        .map(|h| (h.hint.hint_id.as_str(), &h.hint))
        .collect();
    let records: Vec<&ExtractionRecord> = store.records().collect();
    let results = run_parallel(&records, extractor.config.max_parallel, |record| {
        let subject = match record.subject_kind {
            SubjectKind::Code => dataset.checkpoint(&record.subject_id).map(Subject::code),
            SubjectKind::Hint => hints.get(record.subject_id.as_str()).map(|h| Subject::hint(h)),
        };
        subject.map(|s| extractor.judge_record(record, &s))
    });

    let mut outcome = JudgeBatchOutcome::default();
    for (record, result) in records.iter().zip(results) {
        match result {
            None => outcome.store.insert((*record).clone()),
            Some(judged) => {
                if judged.revised {
                    outcome.revised += 1;
                }
                if let Some(reason) = judged.failure {
                    outcome.failures.push(ExtractionFailure {
                        subject_kind: record.subject_kind,
                        subject_id: record.subject_id.clone(),
                        reason,
                        attempts: extractor.config.attempts(),
                    });
                }
                outcome.store.insert(judged.record);
            }
        }
    }
    extractor.cache.persist()?;
    Ok(outcome)
}
