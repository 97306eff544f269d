//! Deterministic pattern-rule extractor used for offline runs and tests.
//!
//! Code: a KC is missing when any `missing_if_absent` literal is absent or
//! any `missing_if_present` literal occurs. Hints: a KC is addressed when
//! its name (case-insensitive) or any of its literals occurs in the text.
//! Results follow database order.

use crate::error::BackendError;
use crate::model::{KcDatabase, KnowledgeComponent};

use super::{Backend, BackendRequest, Task};

pub const STUB_BACKEND_ID: &str = "stub-v1";

#[derive(Debug, Clone, Copy, Default)]
pub struct StubBackend;

/// Why the stub flagged a KC in code.
fn missing_reason(kc: &KnowledgeComponent, code: &str) -> Option<String> {
    let rules = kc.stub_rules.as_ref()?;
    if let Some(lit) = rules.missing_if_absent.iter().find(|l| !code.contains(l.as_str())) {
        return Some(format!("expected pattern {lit:?} is absent"));
    }
    rules
        .missing_if_present
        .iter()
        .find(|l| code.contains(l.as_str()))
        .map(|lit| format!("faulty pattern {lit:?} is present"))
}

fn addressed_reason(kc: &KnowledgeComponent, hint: &str, hint_lower: &str) -> Option<String> {
    if !kc.name.is_empty() && hint_lower.contains(&kc.name.to_lowercase()) {
        return Some(format!("mentions {:?}", kc.name));
    }
    let rules = kc.stub_rules.as_ref()?;
    rules
        .literals()
        .find(|lit| hint.contains(lit))
        .map(|lit| format!("quotes pattern {lit:?}"))
}

pub fn stub_missing_kcs(code: &str, db: &KcDatabase) -> Vec<String> {
    db.kcs
        .iter()
        .filter(|kc| missing_reason(kc, code).is_some())
        .map(|kc| kc.kc_id.clone())
        .collect()
}

pub fn stub_addressed_kcs(hint: &str, db: &KcDatabase) -> Vec<String> {
    let lower = hint.to_lowercase();
    db.kcs
        .iter()
        .filter(|kc| addressed_reason(kc, hint, &lower).is_some())
        .map(|kc| kc.kc_id.clone())
        .collect()
}

fn respond(lines: Vec<String>, ids: &[String]) -> String {
    let mut text = String::from("Pattern rules applied.\n");
    for line in lines {
        text.push_str("- ");
        text.push_str(&line);
        text.push('\n');
    }
    text.push_str(&format!("FINAL: [{}]", ids.join(", ")));
    text
}

impl StubBackend {
    pub fn respond(&self, request: &BackendRequest<'_>) -> String {
        let db = request.db;
        match request.task {
            Task::Code => {
                let mut lines = Vec::new();
                let mut ids = Vec::new();
                for kc in &db.kcs {
                    if let Some(reason) = missing_reason(kc, request.subject_text) {
                        lines.push(format!("{}: {reason}", kc.kc_id));
                        ids.push(kc.kc_id.clone());
                    }
                }
                respond(lines, &ids)
            }
            Task::Hint => {
                let lower = request.subject_text.to_lowercase();
                let mut lines = Vec::new();
                let mut ids = Vec::new();
                for kc in &db.kcs {
                    if let Some(reason) = addressed_reason(kc, request.subject_text, &lower) {
                        lines.push(format!("{}: {reason}", kc.kc_id));
                        ids.push(kc.kc_id.clone());
                    }
                }
                respond(lines, &ids)
            }
            Task::Judge => {
                let ids = request.candidate.unwrap_or_default().to_vec();
                respond(vec!["candidate list accepted".into()], &ids)
            }
        }
    }
}

impl Backend for StubBackend {
    fn id(&self) -> String {
        STUB_BACKEND_ID.to_string()
    }

    fn complete(&self, request: &BackendRequest<'_>) -> Result<String, BackendError> {
        Ok(self.respond(request))
    }
}
