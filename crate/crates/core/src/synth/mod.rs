//! Synthetic cohorts with planted ground truth.
//!
//! Code text is built from stub-rule literals so the stub extractor
//! recovers the planted missing-KC lists exactly; hint text names the
//! planted KCs. Every metric therefore has a known expected value.

pub mod expected;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::extraction::{stub_addressed_kcs, stub_missing_kcs};
use crate::hint_metrics::{resolution_hit, resolved_kcs, TOP_K};
use crate::ingest::{CHECKPOINTS_FILE, DATASET_META_FILE, HINTS_FILE};
use crate::model::{Checkpoint, HintEvent, KcDatabase};

pub use expected::{expected_rates, label_probabilities, ExpectedRates};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const EXPECTATIONS_FILE: &str = "expectations.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub problem_id: String,
    /// Inclusive range for the initial missing-KC count.
    pub initial_missing: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_students: usize,
    pub problems: Vec<ProblemSpec>,
    pub p_resolve: f64,
    /// Per-step probability that a resolved, initially missing KC breaks again.
    pub p_regress: f64,
    pub hint_rate: f64,
    pub q_top3: f64,
    /// Relative weights of hint KC-list lengths 1, 2, ... in order.
    pub hint_length_weights: Vec<f64>,
    /// Inclusive range of whole seconds between checkpoints.
    pub inter_checkpoint_seconds: [u32; 2],
    /// Maximum number of transitions per stream.
    pub max_steps: usize,
    pub term_label: String,
    pub start_time: DateTime<Utc>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            n_students: 50,
            problems: vec![
                ProblemSpec {
                    problem_id: "hailstone".into(),
                    initial_missing: [2, 5],
                },
                ProblemSpec {
                    problem_id: "sum_digits".into(),
                    initial_missing: [1, 4],
                },
            ],
            p_resolve: 0.35,
            p_regress: 0.05,
            hint_rate: 0.4,
            q_top3: 0.85,
            hint_length_weights: vec![0.35, 0.25, 0.15, 0.1, 0.1, 0.05],
            inter_checkpoint_seconds: [30, 600],
            max_steps: 12,
            term_label: "synthetic".into(),
            start_time: "2024-01-15T09:00:00Z".parse().expect("valid timestamp"),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        for (name, p) in [
            ("p_resolve", self.p_resolve),
            ("p_regress", self.p_regress),
            ("hint_rate", self.hint_rate),
            ("q_top3", self.q_top3),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if self.problems.is_empty() {
            return bad("at least one problem is required".into());
        }
        let ids: BTreeSet<&str> = self.problems.iter().map(|p| p.problem_id.as_str()).collect();
        if ids.len() != self.problems.len() {
            return bad("problem ids must be unique".into());
        }
        for p in &self.problems {
            let [lo, hi] = p.initial_missing;
            if lo > hi {
                return bad(format!("problem {}: initial_missing range is empty", p.problem_id));
            }
        }
        if self.hint_length_weights.is_empty()
            || self.hint_length_weights.iter().any(|w| !(*w >= 0.0))
            || self.hint_length_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("hint_length_weights must be non-negative with a positive sum".into());
        }
        let [lo, hi] = self.inter_checkpoint_seconds;
        if lo > hi {
            return bad("inter_checkpoint_seconds range is empty".into());
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1".into());
        }
        Ok(())
    }
}

/// Checks that the stub extractor can recover any planted list: every KC
/// has rules, literals are distinct single-line strings none of which
/// contains another, and KC names neither contain a literal nor each other.
pub fn check_generator_db(db: &KcDatabase) -> Result<(), SynthError> {
    let without: Vec<String> = db
        .kcs
        .iter()
        .filter(|kc| kc.stub_rules.as_ref().is_none_or(|r| r.is_empty()))
        .map(|kc| kc.kc_id.clone())
        .collect();
    if !without.is_empty() {
        return Err(SynthError::MissingStubRules(without));
    }
    let literals: Vec<&str> = db
        .kcs
        .iter()
        .flat_map(|kc| kc.stub_rules.as_ref().into_iter().flat_map(|r| r.literals()))
        .collect();
    for (i, a) in literals.iter().enumerate() {
        if a.is_empty() || a.contains('\n') {
            return Err(SynthError::NotSeparable(format!("literal {a:?} is empty or multi-line")));
        }
        for (j, b) in literals.iter().enumerate() {
            if i != j && b.contains(a) {
                return Err(SynthError::NotSeparable(format!("{a:?} occurs inside {b:?}")));
            }
        }
    }
    for kc in &db.kcs {
        let name = kc.name.to_lowercase();
        if name.is_empty() {
            return Err(SynthError::NotSeparable(format!("{} has an empty name", kc.kc_id)));
        }
        if let Some(lit) = literals.iter().find(|l| kc.name.contains(*l)) {
            return Err(SynthError::NotSeparable(format!(
                "name of {} contains literal {lit:?}",
                kc.kc_id
            )));
        }
        for other in &db.kcs {
            if other.kc_id != kc.kc_id && name.contains(&other.name.to_lowercase()) {
                return Err(SynthError::NotSeparable(format!(
                    "name of {} contains the name of {}",
                    kc.kc_id, other.kc_id
                )));
            }
        }
    }
    Ok(())
}

/// Code text whose stub extraction is exactly `missing` (database order).
pub fn code_for(db: &KcDatabase, missing: &BTreeSet<usize>) -> String {
    let mut lines: Vec<&str> = Vec::new();
    for (i, kc) in db.kcs.iter().enumerate() {
        let Some(rules) = &kc.stub_rules else { continue };
        if missing.contains(&i) {
            if let Some(lit) = rules.missing_if_present.first() {
                lines.push(lit);
            }
        } else {
            lines.extend(rules.missing_if_absent.iter().map(String::as_str));
        }
    }
    lines.join("\n")
}

pub fn hint_text_for(db: &KcDatabase, addressed: &BTreeSet<usize>) -> String {
    let names: Vec<&str> = addressed.iter().map(|&i| db.kcs[i].name.as_str()).collect();
    format!("Hint: {}.", names.join("; "))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthCheckpoint {
    pub checkpoint_id: String,
    pub student_id: String,
    pub problem_id: String,
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthHint {
    pub hint_id: String,
    pub checkpoint_id: String,
    pub addressed: Vec<String>,
    pub planted_top3: bool,
    /// `None` when the checkpoint has no successor.
    pub planted_resolved: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub checkpoints: Vec<TruthCheckpoint>,
    pub hints: Vec<TruthHint>,
    pub expected: ExpectedRates,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub term_label: String,
    pub checkpoints: Vec<Checkpoint>,
    pub hints: Vec<HintEvent>,
    pub truth: GroundTruth,
}

fn to_jsonl<T: Serialize>(rows: &[T]) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("row serializes"));
        out.push('\n');
    }
    out
}

impl SynthOutput {
    pub fn checkpoints_jsonl(&self) -> String {
        to_jsonl(&self.checkpoints)
    }

    pub fn hints_jsonl(&self) -> String {
        to_jsonl(&self.hints)
    }

    /// Writes a dataset directory plus ground truth and expectations.
    /// Returns the paths written.
    pub fn write_dir(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let files = [
            (CHECKPOINTS_FILE, self.checkpoints_jsonl()),
            (HINTS_FILE, self.hints_jsonl()),
            (
                DATASET_META_FILE,
                pretty_json(&serde_json::json!({ "term_label": self.term_label })),
            ),
            (GROUND_TRUTH_FILE, pretty_json(&self.truth)),
            (EXPECTATIONS_FILE, pretty_json(&self.truth.expected)),
        ];
        let mut written = Vec::new();
        for (name, text) in files {
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

struct Generator<'a> {
    config: &'a SynthConfig,
    db: &'a KcDatabase,
    rng: ChaCha8Rng,
    lengths: WeightedIndex<f64>,
    out: SynthOutput,
}

impl Generator<'_> {
    fn ids(&self, set: &BTreeSet<usize>) -> Vec<String> {
        set.iter().map(|&i| self.db.kcs[i].kc_id.clone()).collect()
    }

    fn sample_from(&mut self, pool: &[usize], n: usize) -> Vec<usize> {
        let n = n.min(pool.len());
        index::sample(&mut self.rng, pool.len(), n)
            .into_iter()
            .map(|i| pool[i])
            .collect()
    }

    fn plant_hint(&mut self, missing: &BTreeSet<usize>) -> (BTreeSet<usize>, bool) {
        let length = self.lengths.sample(&mut self.rng) + 1;
        let top: Vec<usize> = missing.iter().copied().take(TOP_K).collect();
        let rest: Vec<usize> = (0..self.db.kcs.len()).filter(|i| !top.contains(i)).collect();
        let hit = self.rng.random_bool(self.config.q_top3);
        let mut addressed = BTreeSet::new();
        if hit {
            addressed.insert(top[self.rng.random_range(0..top.len())]);
            addressed.extend(self.sample_from(&rest, length - 1));
        } else {
            addressed.extend(self.sample_from(&rest, length));
        }
        (addressed, hit)
    }

    fn step(&mut self, initial: &BTreeSet<usize>, missing: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut next = BTreeSet::new();
        for &kc in missing {
            if !self.rng.random_bool(self.config.p_resolve) {
                next.insert(kc);
            }
        }
        for &kc in initial.difference(missing) {
            if self.rng.random_bool(self.config.p_regress) {
                next.insert(kc);
            }
        }
        next
    }

    fn stream(&mut self, student: usize, problem: usize) -> Result<(), SynthError> {
        let spec = &self.config.problems[problem];
        let n_kcs = self.db.kcs.len();
        let [lo, hi] = spec.initial_missing;
        let m0 = self.rng.random_range(lo.min(n_kcs)..=hi.min(n_kcs));
        let initial: BTreeSet<usize> = index::sample(&mut self.rng, n_kcs, m0).into_iter().collect();

        let student_id = format!("s{:04}", student + 1);
        let problem_id = spec.problem_id.clone();
        let offset = (student * self.config.problems.len() + problem) as i64 * 86_400;
        let mut time = self.config.start_time + Duration::seconds(offset);
        let mut missing = initial.clone();
        let mut pending_hint: Option<TruthHint> = None;

        for step in 0..=self.config.max_steps {
            let checkpoint_id = format!("{student_id}-{problem_id}-{step:02}");
            if let Some(mut truth) = pending_hint.take() {
                let before = &self.out.truth.checkpoints.last().expect("hinted checkpoint").missing;
                let resolved = resolved_kcs(before, &self.ids(&missing));
                let addressed: BTreeSet<String> = truth.addressed.iter().cloned().collect();
                truth.planted_resolved = Some(resolution_hit(&resolved, &addressed));
                self.out.truth.hints.push(truth);
            }
            self.out.checkpoints.push(Checkpoint {
                checkpoint_id: checkpoint_id.clone(),
                student_id: student_id.clone(),
                assignment_id: self.db.assignment_id.clone(),
                problem_id: problem_id.clone(),
                timestamp: time,
                code: code_for(self.db, &missing),
                sequence_hint: None,
            });
            self.out.truth.checkpoints.push(TruthCheckpoint {
                checkpoint_id: checkpoint_id.clone(),
                student_id: student_id.clone(),
                problem_id: problem_id.clone(),
                missing: self.ids(&missing),
            });
            if missing.is_empty() {
                break;
            }

            let [gap_lo, gap_hi] = self.config.inter_checkpoint_seconds;
            let gap = self.rng.random_range(gap_lo..=gap_hi);
            if self.rng.random_bool(self.config.hint_rate) {
                let (addressed, hit) = self.plant_hint(&missing);
                let text = hint_text_for(self.db, &addressed);
                let recovered = stub_addressed_kcs(&text, self.db);
                if recovered != self.ids(&addressed) {
                    return Err(SynthError::NotSeparable(format!(
                        "hint {text:?} extracts as {recovered:?}"
                    )));
                }
                let hint_id = format!("h-{checkpoint_id}");
                let delay = if gap >= 2 { self.rng.random_range(1..=gap.min(60) - 1) } else { 0 };
                self.out.hints.push(HintEvent {
                    hint_id: hint_id.clone(),
                    student_id: student_id.clone(),
                    assignment_id: self.db.assignment_id.clone(),
                    problem_id: problem_id.clone(),
                    timestamp: time + Duration::seconds(delay as i64),
                    hint_text: text,
                    checkpoint_ref: Some(checkpoint_id.clone()),
                });
                let truth = TruthHint {
                    hint_id,
                    checkpoint_id: checkpoint_id.clone(),
                    addressed: self.ids(&addressed),
                    planted_top3: hit,
                    planted_resolved: None,
                };
                if step < self.config.max_steps {
                    pending_hint = Some(truth);
                } else {
                    self.out.truth.hints.push(truth);
                }
            }
            if step == self.config.max_steps {
                break;
            }
            missing = self.step(&initial, &missing);
            time += Duration::seconds(gap as i64);
        }
        Ok(())
    }
}

/// Generates a cohort. The same config and database always give the same
/// output.
pub fn generate(config: &SynthConfig, db: &KcDatabase) -> Result<SynthOutput, SynthError> {
    config.validate()?;
    check_generator_db(db)?;
    let lengths = WeightedIndex::new(&config.hint_length_weights)
        .map_err(|e| SynthError::Config(format!("hint_length_weights: {e}")))?;
    let mut gen = Generator {
        config,
        db,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        lengths,
        out: SynthOutput {
            term_label: config.term_label.clone(),
            checkpoints: Vec::new(),
            hints: Vec::new(),
            truth: GroundTruth {
                checkpoints: Vec::new(),
                hints: Vec::new(),
                expected: expected_rates(config, db.kcs.len()),
            },
        },
    };
    for student in 0..config.n_students {
        for problem in 0..config.problems.len() {
            gen.stream(student, problem)?;
        }
    }
    Ok(gen.out)
}

/// Checks that stub extraction of every generated checkpoint matches the
/// planted list. Returns the ids of mismatching checkpoints.
pub fn verify_stub_round_trip(output: &SynthOutput, db: &KcDatabase) -> Vec<String> {
    output
        .checkpoints
        .iter()
        .zip(&output.truth.checkpoints)
        .filter(|(cp, truth)| stub_missing_kcs(&cp.code, db) != truth.missing)
        .map(|(cp, _)| cp.checkpoint_id.clone())
        .collect()
}
