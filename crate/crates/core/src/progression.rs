//! Progression analysis over time-adjacent checkpoint pairs.
//!
//! Each pair is labeled by the change in missing-KC count: fewer is
//! green, unchanged is yellow, more is red. Time and submission counts are
//! then averaged per student for each problem.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::extraction::ExtractionStore;
use crate::ingest::Dataset;
use crate::stats::{mean, sample_sd, two_sample_t, TTestResult, TTestVariant};

pub const DEFAULT_IDLE_CAP_SECONDS: f64 = 1200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Green,
    Yellow,
    Red,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Green, Label::Yellow, Label::Red];

    pub fn from_delta(delta: i64) -> Label {
        match delta.signum() {
            -1 => Label::Green,
            0 => Label::Yellow,
            _ => Label::Red,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Green => "green",
            Label::Yellow => "yellow",
            Label::Red => "red",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "seconds")]
pub enum Elapsed {
    Counted(f64),
    /// The gap exceeded the idle cap; the pair still counts as a submission.
    Idle,
}

impl Elapsed {
    pub fn from_gap(seconds: f64, idle_cap_seconds: f64) -> Elapsed {
        if seconds <= idle_cap_seconds {
            Elapsed::Counted(seconds)
        } else {
            Elapsed::Idle
        }
    }

    pub fn counted_seconds(self) -> f64 {
        match self {
            Elapsed::Counted(s) => s,
            Elapsed::Idle => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressionPair {
    pub student_id: String,
    pub problem_id: String,
    pub from_checkpoint: String,
    pub to_checkpoint: String,
    pub missing_before: usize,
    pub missing_after: usize,
    pub delta: i64,
    pub label: Label,
    pub elapsed: Elapsed,
}

impl ProgressionPair {
    /// Builds a pair from missing-KC counts and the gap between checkpoints.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        student_id: &str,
        problem_id: &str,
        from_checkpoint: &str,
        to_checkpoint: &str,
        missing_before: usize,
        missing_after: usize,
        gap_seconds: f64,
        idle_cap_seconds: f64,
    ) -> Self {
        let delta = missing_after as i64 - missing_before as i64;
        ProgressionPair {
            student_id: student_id.into(),
            problem_id: problem_id.into(),
            from_checkpoint: from_checkpoint.into(),
            to_checkpoint: to_checkpoint.into(),
            missing_before,
            missing_after,
            delta,
            label: Label::from_delta(delta),
            elapsed: Elapsed::from_gap(gap_seconds, idle_cap_seconds),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDrop {
    pub from_checkpoint: String,
    pub to_checkpoint: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairSet {
    pub pairs: Vec<ProgressionPair>,
    pub drops: Vec<PairDrop>,
}

/// One pair per adjacent checkpoint couple in every stream. A pair whose
/// checkpoints lack a code extraction is dropped and reported.
pub fn build_pairs(dataset: &Dataset, store: &ExtractionStore, idle_cap_seconds: f64) -> PairSet {
    let mut out = PairSet::default();
    for stream in dataset.streams.values() {
        for w in stream.windows(2) {
            let (from, to) = (&w[0], &w[1]);
            let before = store.code(&from.checkpoint_id);
            let after = store.code(&to.checkpoint_id);
            let (Some(before), Some(after)) = (before, after) else {
                let missing = if before.is_none() { from } else { to };
                out.drops.push(PairDrop {
                    from_checkpoint: from.checkpoint_id.clone(),
                    to_checkpoint: to.checkpoint_id.clone(),
                    reason: format!("no code extraction for checkpoint {}", missing.checkpoint_id),
                });
                continue;
            };
            let gap = (to.timestamp - from.timestamp).num_milliseconds() as f64 / 1000.0;
            out.pairs.push(ProgressionPair::new(
                &from.student_id,
                &from.problem_id,
                &from.checkpoint_id,
                &to.checkpoint_id,
                before.kc_ids.len(),
                after.kc_ids.len(),
                gap,
                idle_cap_seconds,
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAggregate {
    pub label: Label,
    pub total_time_s: f64,
    pub pair_count: usize,
    pub avg_time_s: f64,
    pub avg_submissions: f64,
    /// Share of the problem's counted time; absent when that total is 0.
    pub time_share: Option<f64>,
    pub submission_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq1Aggregate {
    pub problem_id: String,
    pub term_label: String,
    pub n_students: usize,
    /// Indexed by [`Label::index`].
    pub labels: [LabelAggregate; 3],
}

impl Rq1Aggregate {
    pub fn label(&self, label: Label) -> &LabelAggregate {
        &self.labels[label.index()]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Rq1Report {
    pub aggregates: Vec<Rq1Aggregate>,
    pub notices: Vec<String>,
}

fn shares(values: [f64; 3]) -> [Option<f64>; 3] {
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        values.map(|v| Some(v / total))
    } else {
        [None; 3]
    }
}

/// Per-problem averages over students with at least one pair. Problems in
/// `problem_ids` without pairs are omitted with a notice.
pub fn aggregate_rq1(pairs: &[ProgressionPair], problem_ids: &[String], term_label: &str) -> Rq1Report {
    let mut by_problem: BTreeMap<&str, Vec<&ProgressionPair>> = BTreeMap::new();
    for pair in pairs {
        by_problem.entry(pair.problem_id.as_str()).or_default().push(pair);
    }
    let mut report = Rq1Report::default();
    for id in problem_ids {
        if !by_problem.contains_key(id.as_str()) {
            report.notices.push(format!("problem {id} has no progression pairs; omitted"));
        }
    }
    for (problem_id, group) in by_problem {
        let students: BTreeSet<&str> = group.iter().map(|p| p.student_id.as_str()).collect();
        let n = students.len() as f64;
        let mut time = [0.0; 3];
        let mut count = [0usize; 3];
        for pair in &group {
            time[pair.label.index()] += pair.elapsed.counted_seconds();
            count[pair.label.index()] += 1;
        }
        let time_shares = shares(time);
        let count_shares = shares(count.map(|c| c as f64));
        if time_shares[0].is_none() {
            report.notices.push(format!(
                "problem {problem_id} has no counted time; time shares omitted"
            ));
        }
        let labels = Label::ALL.map(|label| {
            let i = label.index();
            LabelAggregate {
                label,
                total_time_s: time[i],
                pair_count: count[i],
                avg_time_s: time[i] / n,
                avg_submissions: count[i] as f64 / n,
                time_share: time_shares[i],
                submission_share: count_shares[i],
            }
        });
        report.aggregates.push(Rq1Aggregate {
            problem_id: problem_id.to_string(),
            term_label: term_label.to_string(),
            n_students: students.len(),
            labels,
        });
    }
    report
}

/// KC-count reductions (−delta) over green pairs.
pub fn green_reductions(pairs: &[ProgressionPair]) -> Vec<f64> {
    pairs
        .iter()
        .filter(|p| p.label == Label::Green)
        .map(|p| -p.delta as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenSummary {
    pub n_green: usize,
    pub mean_reduction: Option<f64>,
    /// Sample SD; absent with fewer than two green pairs.
    pub sd_reduction: Option<f64>,
}

pub fn green_summary(pairs: &[ProgressionPair]) -> GreenSummary {
    let r = green_reductions(pairs);
    GreenSummary {
        n_green: r.len(),
        mean_reduction: (!r.is_empty()).then(|| mean(&r)),
        sd_reduction: (r.len() >= 2).then(|| sample_sd(&r)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenComparison {
    pub set_a: GreenSummary,
    pub set_b: GreenSummary,
    /// `set_b` against `set_a`: positive t means larger reductions in b.
    pub test: TTestResult,
}

pub fn green_reduction_stats(
    pairs_a: &[ProgressionPair],
    pairs_b: &[ProgressionPair],
    variant: TTestVariant,
) -> Result<GreenComparison, AnalysisError> {
    let (ra, rb) = (green_reductions(pairs_a), green_reductions(pairs_b));
    for (set, r) in [("a", &ra), ("b", &rb)] {
        if r.len() < 2 {
            return Err(AnalysisError::TooFewGreenPairs { set, count: r.len() });
        }
    }
    let test = two_sample_t(&rb, &ra, variant)?;
    Ok(GreenComparison {
        set_a: green_summary(pairs_a),
        set_b: green_summary(pairs_b),
        test,
    })
}
