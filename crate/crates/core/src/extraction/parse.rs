//! Strict parsing of extractor responses.
//!
//! A response is free-text reasoning followed by one machine-readable list:
//! either a `FINAL: [a, b]` line (the last marker wins) or, failing that,
//! the last fenced code block. Every id must exist in the database.

use std::collections::HashSet;

use crate::model::{ExtractionRecord, KcDatabase, SubjectKind};

pub const NO_LIST: &str = "no KC list found";

/// Parses `raw_text` into a record with empty `subject_id` and
/// `extractor_id`; the caller fills those in.
pub fn parse_response(
    raw_text: &str,
    db: &KcDatabase,
    expected_kind: SubjectKind,
) -> Result<ExtractionRecord, String> {
    let (reasoning, list) = locate_list(raw_text).ok_or_else(|| NO_LIST.to_string())?;

    let mut seen = HashSet::new();
    let mut kc_ids = Vec::new();
    for token in list {
        if !db.contains(token) {
            return Err(format!("unknown kc_id: {token}"));
        }
        if seen.insert(token) {
            kc_ids.push(token.to_string());
        }
    }

    Ok(ExtractionRecord {
        subject_kind: expected_kind,
        subject_id: String::new(),
        kc_ids,
        ordered: expected_kind == SubjectKind::Code,
        reasoning: reasoning.trim().to_string(),
        extractor_id: String::new(),
        judged: false,
    })
}

fn locate_list(raw: &str) -> Option<(&str, Vec<&str>)> {
    if let Some(found) = final_marker_list(raw) {
        return Some(found);
    }
    fenced_list(raw)
}

fn final_marker_list(raw: &str) -> Option<(&str, Vec<&str>)> {
    let upper = raw.to_ascii_uppercase();
    let mut search_end = upper.len();
    // walk markers from the end; the first well-formed one wins
    while let Some(pos) = upper[..search_end].rfind("FINAL") {
        let after = raw[pos + "FINAL".len()..].trim_start_matches([' ', '\t']);
        if let Some(body) = after.strip_prefix(':') {
            let body = body.trim_start_matches([' ', '\t']);
            let items = if let Some(inner) = body.strip_prefix('[') {
                inner.find(']').map(|end| &inner[..end])
            } else {
                let line = body.lines().next().unwrap_or("").trim();
                (!line.is_empty()).then_some(line)
            };
            if let Some(items) = items {
                return Some((&raw[..pos], tokens(items)));
            }
        }
        search_end = pos;
    }
    None
}

fn fenced_list(raw: &str) -> Option<(&str, Vec<&str>)> {
    let close = raw.rfind("```")?;
    let open = raw[..close].rfind("```")?;
    let mut body = &raw[open + 3..close];
    // optional info string on the opening fence line
    if let Some(newline) = body.find('\n') {
        let first = body[..newline].trim();
        if !first.is_empty() && !first.contains(['[', ',']) && !first.contains(' ') {
            body = &body[newline + 1..];
        }
    }
    let body = match (body.find('['), body.rfind(']')) {
        (Some(start), Some(end)) if start < end => &body[start + 1..end],
        _ => body,
    };
    Some((&raw[..open], tokens(body)))
}

fn tokens(list: &str) -> Vec<&str> {
    list.split([',', '\n'])
        .map(|t| t.trim_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | '`')))
        .filter(|t| !t.is_empty())
        .collect()
}
