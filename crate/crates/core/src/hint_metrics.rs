//! Hint quality metrics: top-3 overlap with the code's missing KCs and
//! overlap with the KCs resolved by the next submission, both grouped by
//! the number of KCs a hint addresses.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::extraction::ExtractionStore;
use crate::ingest::{next_checkpoint, Dataset};

pub const TOP_K: usize = 3;
/// Lengths at or above this share the last bucket.
pub const MAX_BUCKET: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricOutcome {
    Hit,
    Miss,
    NotApplicable,
}

impl MetricOutcome {
    pub fn from_bool(hit: bool) -> Self {
        if hit {
            MetricOutcome::Hit
        } else {
            MetricOutcome::Miss
        }
    }

    pub fn is_applicable(self) -> bool {
        self != MetricOutcome::NotApplicable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Top3,
    Resolved,
}

/// Whether `addressed` meets the first `min(3, len)` missing KCs.
pub fn top3_overlap(missing_ordered: &[String], addressed: &BTreeSet<String>) -> MetricOutcome {
    if missing_ordered.is_empty() {
        return MetricOutcome::NotApplicable;
    }
    MetricOutcome::from_bool(
        missing_ordered
            .iter()
            .take(TOP_K)
            .any(|kc| addressed.contains(kc)),
    )
}

/// KCs missing before and not after.
pub fn resolved_kcs(missing_i: &[String], missing_next: &[String]) -> BTreeSet<String> {
    let after: BTreeSet<&String> = missing_next.iter().collect();
    missing_i
        .iter()
        .filter(|kc| !after.contains(kc))
        .cloned()
        .collect()
}

pub fn resolution_hit(resolved: &BTreeSet<String>, addressed: &BTreeSet<String>) -> bool {
    !resolved.is_disjoint(addressed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintEvaluation {
    pub hint_id: String,
    pub checkpoint_id: String,
    pub problem_id: String,
    /// `None` when the hint's own extraction is unavailable.
    pub addressed: Option<BTreeSet<String>>,
    pub missing_at_i: Option<Vec<String>>,
    pub missing_at_next: Option<Vec<String>>,
    pub top3_hit: MetricOutcome,
    pub resolved_hit: MetricOutcome,
}

impl HintEvaluation {
    pub fn kc_list_length(&self) -> Option<usize> {
        self.addressed.as_ref().map(BTreeSet::len)
    }

    pub fn outcome(&self, metric: Metric) -> MetricOutcome {
        match metric {
            Metric::Top3 => self.top3_hit,
            Metric::Resolved => self.resolved_hit,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintReport {
    pub evaluations: Vec<HintEvaluation>,
    pub notices: Vec<String>,
}

/// Evaluates every linked hint against its checkpoint and the successor.
pub fn evaluate_hints(dataset: &Dataset, store: &ExtractionStore) -> HintReport {
    let mut report = HintReport::default();
    for linked in &dataset.hints {
        let hint = &linked.hint;
        let addressed: Option<BTreeSet<String>> = store
            .hint(&hint.hint_id)
            .map(|r| r.kc_ids.iter().cloned().collect());
        if addressed.is_none() {
            report
                .notices
                .push(format!("hint {} has no hint extraction", hint.hint_id));
        }
        let checkpoint = dataset.checkpoint(&linked.checkpoint_id);
        let missing_at_i = store.code(&linked.checkpoint_id).map(|r| r.kc_ids.clone());
        if missing_at_i.is_none() {
            report.notices.push(format!(
                "hint {}: checkpoint {} has no code extraction",
                hint.hint_id, linked.checkpoint_id
            ));
        }
        let successor = checkpoint.and_then(|cp| next_checkpoint(dataset, cp).ok().flatten());
        let missing_at_next = successor
            .and_then(|next| store.code(&next.checkpoint_id))
            .map(|r| r.kc_ids.clone());

        let top3_hit = match (&missing_at_i, &addressed) {
            (Some(missing), Some(addressed)) => top3_overlap(missing, addressed),
            _ => MetricOutcome::NotApplicable,
        };
        let resolved_hit = match (&missing_at_i, &missing_at_next, &addressed) {
            (Some(before), Some(after), Some(addressed)) => {
                MetricOutcome::from_bool(resolution_hit(&resolved_kcs(before, after), addressed))
            }
            _ => MetricOutcome::NotApplicable,
        };
        report.evaluations.push(HintEvaluation {
            hint_id: hint.hint_id.clone(),
            checkpoint_id: linked.checkpoint_id.clone(),
            problem_id: hint.problem_id.clone(),
            addressed,
            missing_at_i,
            missing_at_next,
            top3_hit,
            resolved_hit,
        });
    }
    report
}

/// Bucket for a KC-list length: 1..=4, or 5 for "5+". Zero has none.
pub fn bucket_of(length: usize) -> Option<usize> {
    (length > 0).then(|| length.min(MAX_BUCKET))
}

pub fn bucket_label(bucket: usize) -> String {
    if bucket >= MAX_BUCKET {
        format!("{MAX_BUCKET}+")
    } else {
        bucket.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedProportion {
    pub bucket: String,
    pub numerator: usize,
    pub denominator: usize,
    /// Omitted when the denominator is 0.
    pub proportion: Option<f64>,
}

impl GroupedProportion {
    fn new(bucket: String, numerator: usize, denominator: usize) -> Self {
        GroupedProportion {
            bucket,
            numerator,
            denominator,
            proportion: (denominator > 0).then(|| numerator as f64 / denominator as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthGrouping {
    pub metric: Metric,
    /// Buckets 1, 2, 3, 4, 5+ in order, including empty ones.
    pub buckets: Vec<GroupedProportion>,
    /// All bucketed hints together.
    pub overall: GroupedProportion,
    /// Hints whose extraction found no KCs; excluded from the buckets.
    pub no_kc_hints: usize,
}

pub fn group_by_length(evaluations: &[HintEvaluation], metric: Metric) -> LengthGrouping {
    let mut hits = [0usize; MAX_BUCKET + 1];
    let mut totals = [0usize; MAX_BUCKET + 1];
    let mut no_kc_hints = 0;
    for eval in evaluations {
        let Some(length) = eval.kc_list_length() else {
            continue;
        };
        let Some(bucket) = bucket_of(length) else {
            no_kc_hints += 1;
            continue;
        };
        let outcome = eval.outcome(metric);
        if outcome.is_applicable() {
            totals[bucket] += 1;
            if outcome == MetricOutcome::Hit {
                hits[bucket] += 1;
            }
        }
    }
    let buckets = (1..=MAX_BUCKET)
        .map(|b| GroupedProportion::new(bucket_label(b), hits[b], totals[b]))
        .collect();
    LengthGrouping {
        metric,
        buckets,
        overall: GroupedProportion::new("all".into(), hits.iter().sum(), totals.iter().sum()),
        no_kc_hints,
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn top3_cut_at_rank_three() {
        let missing = ids(&["K2", "K7", "K9", "K4"]);
        assert_eq!(top3_overlap(&missing, &set(&["K7"])), MetricOutcome::Hit);
        assert_eq!(top3_overlap(&missing, &set(&["K4"])), MetricOutcome::Miss);
        assert_eq!(top3_overlap(&[], &set(&["K1"])), MetricOutcome::NotApplicable);
        assert_eq!(top3_overlap(&missing, &set(&[])), MetricOutcome::Miss);
    }

    #[test]
    fn resolved_is_set_difference() {
        assert_eq!(resolved_kcs(&ids(&["A", "B", "C"]), &ids(&["B"])), set(&["A", "C"]));
        assert_eq!(resolved_kcs(&ids(&["A"]), &ids(&["A", "B"])), set(&[]));
        assert_eq!(resolved_kcs(&ids(&["A"]), &[]), set(&["A"]));
    }

    #[test]
    fn resolution_needs_shared_kc() {
        assert!(resolution_hit(&set(&["A", "C"]), &set(&["A", "D"])));
        assert!(!resolution_hit(&set(&[]), &set(&["A"])));
        assert!(!resolution_hit(&set(&["B"]), &set(&[])));
    }

    fn eval(length: usize, top3: MetricOutcome) -> HintEvaluation {
        HintEvaluation {
            hint_id: "h".into(),
            checkpoint_id: "c".into(),
            problem_id: "p".into(),
            addressed: Some((0..length).map(|i| format!("K{i}")).collect()),
            missing_at_i: None,
            missing_at_next: None,
            top3_hit: top3,
            resolved_hit: MetricOutcome::NotApplicable,
        }
    }

    #[test]
    fn bucket_arithmetic() {
        use MetricOutcome::*;
        let evals: Vec<_> = [(1, Hit), (1, Miss), (2, Hit), (5, Hit), (6, Hit)]
            .into_iter()
            .map(|(l, o)| eval(l, o))
            .collect();
        let g = group_by_length(&evals, Metric::Top3);
        let rows: Vec<(String, usize, usize)> = g
            .buckets
            .iter()
            .map(|b| (b.bucket.clone(), b.numerator, b.denominator))
            .collect();
        assert_eq!(
            rows,
            [
                ("1".into(), 1, 2),
                ("2".into(), 1, 1),
                ("3".into(), 0, 0),
                ("4".into(), 0, 0),
                ("5+".into(), 2, 2)
            ]
        );
        assert_eq!(g.buckets[0].proportion, Some(0.5));
        assert_eq!(g.buckets[2].proportion, None);
        assert_eq!((g.overall.numerator, g.overall.denominator), (4, 5));
    }

    #[test]
    fn not_applicable_and_zero_length_are_excluded() {
        let evals = [
            eval(1, MetricOutcome::NotApplicable),
            eval(3, MetricOutcome::NotApplicable),
            eval(0, MetricOutcome::Miss),
        ];
        let g = group_by_length(&evals, Metric::Top3);
        assert!(g.buckets.iter().all(|b| b.denominator == 0 && b.proportion.is_none()));
        assert_eq!(g.no_kc_hints, 1);
        assert_eq!(g.overall.proportion, None);

        let g = group_by_length(&[eval(2, MetricOutcome::Hit)], Metric::Top3);
        assert_eq!(g.buckets[1].proportion, Some(1.0));
    }

    fn outcome() -> impl Strategy<Value = MetricOutcome> {
        prop_oneof![
            Just(MetricOutcome::Hit),
            Just(MetricOutcome::Miss),
            Just(MetricOutcome::NotApplicable)
        ]
    }

    proptest! {
        #[test]
        fn top3_is_monotone_in_addressed(
            missing in prop::collection::vec("[A-H]", 0..6),
            addressed in prop::collection::btree_set("[A-H]", 0..5),
            extra in "[A-H]",
        ) {
            let before = top3_overlap(&missing, &addressed);
            let mut more = addressed.clone();
            more.insert(extra);
            let after = top3_overlap(&missing, &more);
            if before == MetricOutcome::Hit {
                prop_assert_eq!(after, MetricOutcome::Hit);
            }
            prop_assert_eq!(before.is_applicable(), after.is_applicable());
        }

        #[test]
        fn no_change_resolves_nothing(xs in prop::collection::vec("[A-H]", 0..8)) {
            prop_assert!(resolved_kcs(&xs, &xs).is_empty());
        }

        #[test]
        fn overall_is_weighted_mean_of_buckets(rows in prop::collection::vec((0usize..9, outcome()), 0..80)) {
            let evals: Vec<_> = rows.into_iter().map(|(l, o)| eval(l, o)).collect();
            let g = group_by_length(&evals, Metric::Top3);
            let weighted: f64 = g.buckets.iter().filter_map(|b| Some(b.proportion? * b.denominator as f64)).sum();
            let denom: usize = g.buckets.iter().map(|b| b.denominator).sum();
            prop_assert_eq!(denom, g.overall.denominator);
            if denom > 0 {
                prop_assert!((weighted / denom as f64 - g.overall.proportion.unwrap()).abs() < 1e-12);
            }
            for b in &g.buckets {
                prop_assert!(b.numerator <= b.denominator);
            }
        }
    }
}
