//! Prompt templates and rendering.
//!
//! Placeholders use `{{name}}` syntax. Substitution is a single pass, so
//! placeholder-like text inside student code is never expanded.

use crate::model::{KcDatabase, SubjectKind};

pub const DEFAULT_CODE_TEMPLATE: &str = include_str!("../../templates/code.txt");
pub const DEFAULT_HINT_TEMPLATE: &str = include_str!("../../templates/hint.txt");
pub const DEFAULT_JUDGE_TEMPLATE: &str = include_str!("../../templates/judge.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateKind {
    Code,
    Hint,
    Judge,
}

impl TemplateKind {
    pub fn required_placeholders(self) -> &'static [&'static str] {
        match self {
            TemplateKind::Code => &["code", "kc_list", "metadata"],
            TemplateKind::Hint => &["hint", "kc_list", "metadata"],
            TemplateKind::Judge => &["subject", "candidate", "kc_list", "metadata"],
        }
    }
}

/// Names of required placeholders absent from `template`.
pub fn missing_placeholders(template: &str, kind: TemplateKind) -> Vec<&'static str> {
    kind.required_placeholders()
        .iter()
        .copied()
        .filter(|name| !template.contains(&format!("{{{{{name}}}}}")))
        .collect()
}

/// Replaces every `{{name}}` whose name has a value; unknown placeholders
/// are left as they are.
pub fn render(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                let name = &after[..end];
                match values.iter().find(|(k, _)| *k == name) {
                    Some((_, value)) => out.push_str(value),
                    None => {
                        out.push_str("{{");
                        out.push_str(name);
                        out.push_str("}}");
                    }
                }
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// One line per KC: `- <id> [<category>] <name>: <description>`.
pub fn format_kc_list(db: &KcDatabase) -> String {
    db.kcs
        .iter()
        .map(|kc| {
            format!(
                "- {} [{}] {}: {}",
                kc.kc_id, kc.category, kc.name, kc.description
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metadata<'a> {
    pub assignment_id: &'a str,
    pub problem_id: &'a str,
    pub problem_statement: Option<&'a str>,
}

impl Metadata<'_> {
    pub fn render(&self) -> String {
        let mut text = format!(
            "assignment_id: {}\nproblem_id: {}",
            self.assignment_id, self.problem_id
        );
        if let Some(statement) = self.problem_statement {
            text.push_str("\nproblem_statement: ");
            text.push_str(statement);
        }
        text
    }
}

pub fn render_extraction_prompt(
    template: &str,
    kind: SubjectKind,
    subject_text: &str,
    db: &KcDatabase,
    metadata: &Metadata<'_>,
) -> String {
    let kc_list = format_kc_list(db);
    let meta = metadata.render();
    let subject_key = match kind {
        SubjectKind::Code => "code",
        SubjectKind::Hint => "hint",
    };
    render(
        template,
        &[(subject_key, subject_text), ("kc_list", &kc_list), ("metadata", &meta)],
    )
}

pub fn render_judge_prompt(
    template: &str,
    kind: SubjectKind,
    subject_text: &str,
    candidate: &[String],
    db: &KcDatabase,
    metadata: &Metadata<'_>,
) -> String {
    let kc_list = format_kc_list(db);
    let meta = metadata.render();
    let candidate = format!("[{}]", candidate.join(", "));
    render(
        template,
        &[
            ("subject_kind", kind.as_str()),
            ("subject", subject_text),
            ("candidate", &candidate),
            ("kc_list", &kc_list),
            ("metadata", &meta),
        ],
    )
}
