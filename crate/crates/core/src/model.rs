//! Domain types shared by every stage of the pipeline, and the KC database
//! with its integrity rules.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ModelError;

/// Example KC database for a CS1 homework. Illustrative content only.
pub const EXAMPLE_KCDB_JSON: &str = include_str!("../data/example_kcdb.json");

/// KC count range a well-scoped assignment database is expected to fall in.
pub const EXPECTED_KC_RANGE: (usize, usize) = (30, 40);
/// Category count range a well-scoped assignment database is expected to fall in.
pub const EXPECTED_CATEGORY_RANGE: (usize, usize) = (7, 9);

/// Literal patterns used only by the deterministic stub extractor.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubRules {
    /// The KC is missing from code that lacks any of these literals.
    #[serde(default)]
    pub missing_if_absent: Vec<String>,
    /// The KC is missing from code that contains any of these literals.
    #[serde(default)]
    pub missing_if_present: Vec<String>,
}

impl StubRules {
    pub fn is_empty(&self) -> bool {
        self.missing_if_absent.is_empty() && self.missing_if_present.is_empty()
    }

    pub fn literals(&self) -> impl Iterator<Item = &str> {
        self.missing_if_absent
            .iter()
            .chain(self.missing_if_present.iter())
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeComponent {
    pub kc_id: String,
    pub name: String,
    pub description: String,
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stub_rules: Option<StubRules>,
}

/// The human-authored KC catalog for one assignment. Extraction may only
/// select ids from here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KcDatabase {
    pub assignment_id: String,
    pub categories: Vec<String>,
    pub kcs: Vec<KnowledgeComponent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

impl Finding {
    fn error(message: impl Into<String>) -> Self {
        Finding {
            severity: Severity::Error,
            message: message.into(),
        }
    }

    fn warning(message: impl Into<String>) -> Self {
        Finding {
            severity: Severity::Warning,
            message: message.into(),
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

impl KcDatabase {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Loads a database and refuses it if validation reports any error.
    pub fn load_validated(path: &Path) -> Result<Self, ModelError> {
        let db = Self::load(path)?;
        let errors: Vec<String> = validate_database(&db)
            .into_iter()
            .filter(|f| f.severity == Severity::Error)
            .map(|f| f.message)
            .collect();
        if errors.is_empty() {
            Ok(db)
        } else {
            Err(ModelError::Invalid(errors.join("; ")))
        }
    }

    pub fn example() -> Self {
        Self::from_json(EXAMPLE_KCDB_JSON).expect("bundled KC database is valid JSON")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("KC database serializes")
    }

    pub fn lookup(&self, kc_id: &str) -> Option<&KnowledgeComponent> {
        lookup_kc(self, kc_id)
    }

    pub fn contains(&self, kc_id: &str) -> bool {
        self.lookup(kc_id).is_some()
    }

    /// Position of a KC in database order, used as the stub's importance order.
    pub fn position(&self, kc_id: &str) -> Option<usize> {
        self.kcs.iter().position(|kc| kc.kc_id == kc_id)
    }

    /// Hex SHA-256 over the canonical JSON form. Any edit, including a
    /// description change, yields a new hash.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("KC database serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Checks the database invariants. Findings are ordered: per-KC errors in
/// database order, then range warnings.
pub fn validate_database(db: &KcDatabase) -> Vec<Finding> {
    let mut findings = Vec::new();

    if db.assignment_id.trim().is_empty() {
        findings.push(Finding::error("empty assignment_id"));
    }

    let mut seen_categories = HashSet::new();
    for category in &db.categories {
        if category.trim().is_empty() {
            findings.push(Finding::error("empty category label"));
        } else if !seen_categories.insert(category.as_str()) {
            findings.push(Finding::error(format!("duplicate category {category}")));
        }
    }

    let mut seen_ids = HashSet::new();
    for (index, kc) in db.kcs.iter().enumerate() {
        if kc.kc_id.is_empty() {
            findings.push(Finding::error(format!("empty kc_id at position {index}")));
        } else if !seen_ids.insert(kc.kc_id.as_str()) {
            findings.push(Finding::error(format!("duplicate kc_id {}", kc.kc_id)));
        }
        if kc.category.trim().is_empty() {
            findings.push(Finding::error(format!("empty category on kc_id {}", kc.kc_id)));
        } else if !seen_categories.contains(kc.category.as_str()) {
            findings.push(Finding::error(format!(
                "kc_id {} has unknown category {}",
                kc.kc_id, kc.category
            )));
        }
    }

    let (kc_lo, kc_hi) = EXPECTED_KC_RANGE;
    if !(kc_lo..=kc_hi).contains(&db.kcs.len()) {
        findings.push(Finding::warning(format!(
            "{} KCs outside the expected range {kc_lo}-{kc_hi}",
            db.kcs.len()
        )));
    }
    let (cat_lo, cat_hi) = EXPECTED_CATEGORY_RANGE;
    if !(cat_lo..=cat_hi).contains(&db.categories.len()) {
        findings.push(Finding::warning(format!(
            "{} categories outside the expected range {cat_lo}-{cat_hi}",
            db.categories.len()
        )));
    }

    findings
}

pub fn lookup_kc<'a>(db: &'a KcDatabase, kc_id: &str) -> Option<&'a KnowledgeComponent> {
    if kc_id.is_empty() {
        return None;
    }
    db.kcs.iter().find(|kc| kc.kc_id == kc_id)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub checkpoint_id: String,
    pub student_id: String,
    pub assignment_id: String,
    pub problem_id: String,
    pub timestamp: DateTime<Utc>,
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_hint: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintEvent {
    pub hint_id: String,
    pub student_id: String,
    pub assignment_id: String,
    pub problem_id: String,
    pub timestamp: DateTime<Utc>,
    pub hint_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_ref: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubjectKind {
    Code,
    Hint,
}

impl SubjectKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SubjectKind::Code => "code",
            SubjectKind::Hint => "hint",
        }
    }
}

impl fmt::Display for SubjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// KCs extracted for one subject. For code the list is the missing KCs,
/// most important first; for hints it is the unordered addressed set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub subject_kind: SubjectKind,
    pub subject_id: String,
    pub kc_ids: Vec<String>,
    pub ordered: bool,
    pub reasoning: String,
    pub extractor_id: String,
    #[serde(default)]
    pub judged: bool,
}

impl ExtractionRecord {
    /// Checks the record against `db`: every id known, no duplicates, and
    /// orderedness matching the subject kind.
    pub fn check(&self, db: &KcDatabase) -> Result<(), ModelError> {
        if self.ordered != (self.subject_kind == SubjectKind::Code) {
            return Err(ModelError::Invalid(format!(
                "record {} has ordered={} for a {} subject",
                self.subject_id, self.ordered, self.subject_kind
            )));
        }
        let mut seen = HashSet::new();
        for id in &self.kc_ids {
            if !db.contains(id) {
                return Err(ModelError::Invalid(format!("unknown kc_id: {id}")));
            }
            if !seen.insert(id.as_str()) {
                return Err(ModelError::Invalid(format!("duplicate kc_id: {id}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn kc(id: &str, category: &str) -> KnowledgeComponent {
        KnowledgeComponent {
            kc_id: id.to_string(),
            name: format!("name of {id}"),
            description: format!("description of {id}"),
            category: category.to_string(),
            stub_rules: None,
        }
    }

    fn db_with(n_kcs: usize, n_categories: usize) -> KcDatabase {
        let categories: Vec<String> = (0..n_categories).map(|c| format!("cat{c}")).collect();
        let kcs = (0..n_kcs)
            .map(|i| kc(&format!("K{i}"), &categories[i % n_categories]))
            .collect();
        KcDatabase {
            assignment_id: "hw01".into(),
            categories,
            kcs,
        }
    }

    #[test]
    fn well_formed_database_in_range_has_no_findings() {
        let db = db_with(35, 8);
        assert!(validate_database(&db).is_empty());
    }

    #[test]
    fn duplicate_id_is_one_error() {
        let mut db = db_with(35, 8);
        db.kcs[3].kc_id = "K1".into();
        let findings = validate_database(&db);
        assert_eq!(
            findings,
            vec![Finding {
                severity: Severity::Error,
                message: "duplicate kc_id K1".into()
            }]
        );
    }

    #[test]
    fn small_database_gets_two_warnings_only() {
        let db = db_with(5, 2);
        let findings = validate_database(&db);
        assert_eq!(findings.len(), 2);
        assert!(findings.iter().all(|f| f.severity == Severity::Warning));
    }

    #[test]
    fn dangling_category_is_an_error() {
        let mut db = db_with(35, 8);
        db.kcs[0].category = "Nope".into();
        let findings = validate_database(&db);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].severity, Severity::Error);
        assert!(findings[0].message.contains("unknown category Nope"));
    }

    #[test]
    fn validation_is_pure() {
        let mut db = db_with(4, 1);
        db.kcs[2].kc_id = "K0".into();
        assert_eq!(validate_database(&db), validate_database(&db));
    }

    #[test]
    fn lookup_cases() {
        let db = db_with(10, 8);
        assert_eq!(lookup_kc(&db, "K7").unwrap().kc_id, "K7");
        assert!(lookup_kc(&db, "K99").is_none());
        assert!(lookup_kc(&db, "").is_none());
    }

    #[test]
    fn bundled_database_is_valid_and_in_range() {
        let db = KcDatabase::example();
        assert!(validate_database(&db).is_empty(), "{:?}", validate_database(&db));
        assert!(db.kcs.iter().all(|kc| kc.stub_rules.as_ref().is_some_and(|r| !r.is_empty())));
    }

    #[test]
    fn hash_changes_with_description() {
        let db = KcDatabase::example();
        let mut edited = db.clone();
        edited.kcs[0].description.push('!');
        assert_ne!(db.content_hash(), edited.content_hash());
        assert_eq!(db.content_hash(), KcDatabase::example().content_hash());
    }

    #[test]
    fn bom_is_tolerated() {
        let text = format!("\u{feff}{}", EXAMPLE_KCDB_JSON);
        assert_eq!(KcDatabase::from_json(&text).unwrap(), KcDatabase::example());
    }

    #[test]
    fn record_check_rejects_wrong_orderedness() {
        let db = db_with(3, 1);
        let record = ExtractionRecord {
            subject_kind: SubjectKind::Hint,
            subject_id: "h1".into(),
            kc_ids: vec!["K1".into()],
            ordered: true,
            reasoning: String::new(),
            extractor_id: "stub".into(),
            judged: false,
        };
        assert!(record.check(&db).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_db() -> impl Strategy<Value = KcDatabase> {
            (
                "[a-z0-9]{1,8}",
                proptest::collection::vec("[A-Za-z ]{1,12}", 1..6),
                proptest::collection::vec(
                    (
                        "[a-z.\\-]{1,10}",
                        "[A-Za-z ]{0,20}",
                        "[ -~]{0,40}",
                        any::<prop::sample::Index>(),
                        proptest::option::of((
                            proptest::collection::vec("[ -~]{1,8}", 0..3),
                            proptest::collection::vec("[ -~]{1,8}", 0..3),
                        )),
                    ),
                    0..12,
                ),
            )
                .prop_map(|(assignment_id, categories, raw)| {
                    let mut seen = HashSet::new();
                    let kcs = raw
                        .into_iter()
                        .filter(|(id, ..)| seen.insert(id.clone()))
                        .map(|(kc_id, name, description, cat, rules)| KnowledgeComponent {
                            kc_id,
                            name,
                            description,
                            category: categories[cat.index(categories.len())].clone(),
                            stub_rules: rules.map(|(a, p)| StubRules {
                                missing_if_absent: a,
                                missing_if_present: p,
                            }),
                        })
                        .collect();
                    KcDatabase {
                        assignment_id,
                        categories,
                        kcs,
                    }
                })
        }

        proptest! {
            #[test]
            fn json_round_trip(db in arb_db()) {
                let text = serde_json::to_string(&db).unwrap();
                let back = KcDatabase::from_json(&text).unwrap();
                prop_assert_eq!(back, db);
            }
        }
    }
}
