use proptest::prelude::*;

use super::*;
use crate::model::{ExtractionRecord, SubjectKind};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn pooled_hand_example() {
    let r = two_sample_t(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0], TTestVariant::Pooled).unwrap();
    assert!(close(r.t_statistic, -1.224_744_871_391_589, 1e-12));
    assert_eq!(r.dof, 4.0);
    assert!(close(r.p_value_two_sided, 0.287_864_134_726_690_8, 1e-10));
    assert_eq!(r.variant, TTestVariant::Pooled);
}

#[test]
fn welch_reference_example() {
    let r = two_sample_t(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 8.0, 10.0], TTestVariant::Welch)
        .unwrap();
    assert!(close(r.t_statistic, -2.251_436_323_159_369_5, 1e-12));
    assert!(close(r.dof, 5.520_787_746_170_677, 1e-9));
    assert!(close(r.p_value_two_sided, 0.069_133_593_192_392_36, 1e-9));
}

#[test]
fn identical_samples_are_null() {
    let xs = [3.0, 1.5, 2.25, 9.0];
    let r = two_sample_t(&xs, &xs, TTestVariant::Pooled).unwrap();
    assert_eq!(r.t_statistic, 0.0);
    assert_eq!(r.p_value_two_sided, 1.0);
    assert_eq!(r.effect_size_r, 0.0);
    let constant = two_sample_t(&[2.0, 2.0], &[2.0, 2.0, 2.0], TTestVariant::Pooled).unwrap();
    assert_eq!((constant.t_statistic, constant.p_value_two_sided), (0.0, 1.0));
}

#[test]
fn degenerate_inputs_are_refused() {
    assert_eq!(
        two_sample_t(&[1.0], &[1.0, 2.0], TTestVariant::Pooled),
        Err(StatsError::SampleTooSmall {
            which: "a",
            len: 1,
            needed: 2
        })
    );
    assert_eq!(
        two_sample_t(&[1.0, 1.0], &[2.0, 2.0], TTestVariant::Welch),
        Err(StatsError::ZeroVariance)
    );
}

#[test]
fn effect_size_from_reported_statistics() {
    let r = effect_size_r(4.93, 2116.0);
    assert!(close(r, 0.107, 0.001), "{r}");
    assert!(close(r, 0.106_563_652_192_758_6, 1e-12), "{r}");
}

#[test]
fn kappa_hand_cases() {
    let a = [true, true, true, true, false, false, false, false, true, false];
    let b = [true, true, true, true, false, false, false, false, false, true];
    let r = cohens_kappa(&a, &b).unwrap();
    assert_eq!(r.percent_agreement, 0.8);
    assert!(close(r.cohens_kappa.unwrap(), 0.6, 1e-12));

    let mixed = [true, false, true, false, false];
    assert_eq!(cohens_kappa(&mixed, &mixed).unwrap().cohens_kappa, Some(1.0));

    let all = [true; 6];
    let r = cohens_kappa(&all, &all).unwrap();
    assert_eq!(r.percent_agreement, 1.0);
    assert_eq!(r.cohens_kappa, None);

    assert_eq!(
        cohens_kappa(&[true], &[true, false]),
        Err(StatsError::LengthMismatch { a: 1, b: 2 })
    );
    assert_eq!(cohens_kappa(&[], &[]), Err(StatsError::Empty));
}

#[test]
fn thirteen_of_fourteen() {
    let a = [true; 14];
    let mut b = [true; 14];
    b[5] = false;
    let r = cohens_kappa(&a, &b).unwrap();
    assert!(close(r.percent_agreement, 0.9286, 5e-5));
}

fn candidates(n: usize) -> Vec<LabelingCandidate> {
    (0..n)
        .map(|i| LabelingCandidate {
            record: ExtractionRecord {
                subject_kind: SubjectKind::Code,
                subject_id: format!("c{i:03}"),
                kc_ids: vec!["loop.update".into()],
                ordered: true,
                reasoning: String::new(),
                extractor_id: "stub-v1".into(),
                judged: false,
            },
            subject_text: format!("code {i}"),
        })
        .collect()
}

#[test]
fn labeling_sample_dimensions() {
    let pool = candidates(200);
    let sample = draw_labeling_sample(&pool, 63, 7, 0.22).unwrap();
    assert_eq!(sample.items.len(), 63);
    assert_eq!(sample.joint_count(), 14);
    assert_eq!(sample, draw_labeling_sample(&pool, 63, 7, 0.22).unwrap());
    assert_ne!(sample, draw_labeling_sample(&pool, 63, 8, 0.22).unwrap());

    let all = draw_labeling_sample(&pool[..20], 20, 3, 0.0).unwrap();
    let mut ids: Vec<_> = all.items.iter().map(|i| i.subject_id.clone()).collect();
    ids.sort();
    let expected: Vec<_> = pool[..20].iter().map(|c| c.record.subject_id.clone()).collect();
    assert_eq!(ids, expected);

    assert_eq!(
        draw_labeling_sample(&pool[..5], 6, 1, 0.2),
        Err(StatsError::SampleTooLarge {
            requested: 6,
            available: 5
        })
    );
}

#[test]
fn export_is_blind_and_reads_back() {
    let sample = draw_labeling_sample(&candidates(10), 4, 1, 0.5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.csv");
    write_labeling_csv(&sample, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("item_id,subject_kind,subject_text,kc_list,joint_flag,verdict\n"));
    assert!(!text.contains("stub-v1"));
    let blank = read_rater_csv(&path).unwrap();
    assert_eq!(blank.rater, "labels");
    assert!(blank.verdicts.is_empty());
}

fn rater(name: &str, verdicts: &[(&str, bool)]) -> RaterLabels {
    RaterLabels {
        rater: name.into(),
        verdicts: verdicts.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

#[test]
fn scoring_joint_items_and_accuracy() {
    let sample = draw_labeling_sample(&candidates(63), 63, 11, 14.0 / 63.0).unwrap();
    let joint: Vec<&str> = sample.items.iter().filter(|i| i.joint).map(|i| i.item_id.as_str()).collect();
    assert_eq!(joint.len(), 14);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (k, id) in joint.iter().enumerate() {
        a.push((*id, true));
        b.push((*id, k != 0));
    }
    let score = score_labels(&sample, &[rater("a", &a), rater("b", &b)]).unwrap();
    let pair = score.pairs[0].agreement.unwrap();
    assert_eq!(pair.n_items, 14);
    assert!(close(pair.percent_agreement, 13.0 / 14.0, 1e-12));
    // the split item is a tie and does not count as endorsed
    assert_eq!(score.rated_items, 14);
    assert_eq!(score.endorsed_items, 13);
}

#[test]
fn accuracy_over_the_whole_sample() {
    let sample = draw_labeling_sample(&candidates(63), 63, 2, 0.0).unwrap();
    let verdicts: Vec<(&str, bool)> = sample
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| (item.item_id.as_str(), i >= 9))
        .collect();
    let score = score_labels(&sample, &[rater("solo", &verdicts)]).unwrap();
    assert!(score.pairs.is_empty());
    assert!(close(score.accuracy.unwrap(), 0.857, 5e-4));
}

#[test]
fn rater_without_joint_items_skips_kappa() {
    let sample = draw_labeling_sample(&candidates(10), 10, 5, 0.3).unwrap();
    let plain = sample.items.iter().find(|i| !i.joint).unwrap();
    let joint = sample.items.iter().find(|i| i.joint).unwrap();
    let score = score_labels(
        &sample,
        &[
            rater("a", &[(plain.item_id.as_str(), true)]),
            rater("b", &[(joint.item_id.as_str(), true)]),
        ],
    )
    .unwrap();
    assert!(score.pairs[0].agreement.is_none());
    assert!(score.pairs[0].notice.as_deref().unwrap().contains("kappa skipped"));
}

#[test]
fn unknown_items_and_bad_verdicts_are_errors() {
    let sample = draw_labeling_sample(&candidates(5), 5, 5, 0.0).unwrap();
    let err = score_labels(&sample, &[rater("a", &[("L999", true), ("X1", false)])]).unwrap_err();
    assert_eq!(err, StatsError::UnknownItems(vec!["L999".into(), "X1".into()]));

    let csv = "item_id,subject_kind,subject_text,kc_list,joint_flag,verdict\nL001,code,x,,0,maybe\n";
    assert!(matches!(
        RaterLabels::parse_csv("r", csv),
        Err(StatsError::InvalidVerdict { .. })
    ));
    let csv = "item_id,subject_kind,subject_text,kc_list,joint_flag,verdict\nL001,code,x,,0, Agree \nL002,code,y,,1,disagree\n";
    let r = RaterLabels::parse_csv("r", csv).unwrap();
    assert_eq!(r.verdicts["L001"], true);
    assert_eq!(r.verdicts["L002"], false);
}

fn sample_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 2..15)
}

proptest! {
    #[test]
    fn swap_flips_t_only(a in sample_strategy(), b in sample_strategy(), welch in any::<bool>()) {
        let variant = if welch { TTestVariant::Welch } else { TTestVariant::Pooled };
        if let (Ok(x), Ok(y)) = (two_sample_t(&a, &b, variant), two_sample_t(&b, &a, variant)) {
            prop_assert!((x.t_statistic + y.t_statistic).abs() < 1e-9 * (1.0 + x.t_statistic.abs()));
            prop_assert!((x.p_value_two_sided - y.p_value_two_sided).abs() < 1e-12);
            prop_assert!((x.effect_size_r - y.effect_size_r).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&x.p_value_two_sided));
            prop_assert!((0.0..=1.0).contains(&x.effect_size_r));
            let r = effect_size_r(x.t_statistic, x.dof);
            prop_assert!((r - x.effect_size_r).abs() < 1e-15);
        }
    }

    #[test]
    fn pooled_t_is_shift_and_scale_invariant(
        a in sample_strategy(), b in sample_strategy(), shift in -50.0f64..50.0, scale in 0.1f64..10.0,
    ) {
        let base = two_sample_t(&a, &b, TTestVariant::Pooled);
        let moved_a: Vec<f64> = a.iter().map(|x| (x + shift) * scale).collect();
        let moved_b: Vec<f64> = b.iter().map(|x| (x + shift) * scale).collect();
        let moved = two_sample_t(&moved_a, &moved_b, TTestVariant::Pooled);
        if let (Ok(x), Ok(y)) = (base, moved) {
            prop_assert!((x.t_statistic - y.t_statistic).abs() < 1e-6 * (1.0 + x.t_statistic.abs()));
            prop_assert_eq!(x.dof, (a.len() + b.len() - 2) as f64);
            prop_assert!(((mean(&moved_a) - mean(&moved_b)) - scale * (mean(&a) - mean(&b))).abs() < 1e-6 * (1.0 + scale * 200.0));
        }
    }

    #[test]
    fn kappa_recomputes_from_counts(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60)) {
        let (a, b): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        let r = cohens_kappa(&a, &b).unwrap();
        let n = r.counts.n() as f64;
        prop_assert_eq!(r.counts.n() as usize, a.len());
        let p_o = r.counts.agreements() as f64 / n;
        prop_assert!((p_o - r.percent_agreement).abs() < 1e-15);
        let a_yes = (r.counts.both_yes + r.counts.a_yes_b_no) as f64 / n;
        let b_yes = (r.counts.both_yes + r.counts.a_no_b_yes) as f64 / n;
        let p_e = a_yes * b_yes + (1.0 - a_yes) * (1.0 - b_yes);
        match r.cohens_kappa {
            Some(k) => {
                prop_assert!(k <= 1.0 + 1e-12 && k >= -1.0 - 1e-12);
                prop_assert!((k - (p_o - p_e) / (1.0 - p_e)).abs() < 1e-9);
            }
            None => prop_assert!((p_e - 1.0).abs() < 1e-12),
        }
    }

    #[test]
    fn sampling_is_reproducible(n in 0usize..40, seed in any::<u64>(), frac in 0.0f64..=1.0) {
        let pool = candidates(40);
        let x = draw_labeling_sample(&pool, n, seed, frac).unwrap();
        prop_assert_eq!(&x, &draw_labeling_sample(&pool, n, seed, frac).unwrap());
        prop_assert_eq!(x.joint_count(), (n as f64 * frac).round() as usize);
        let distinct: std::collections::BTreeSet<_> = x.items.iter().map(|i| &i.subject_id).collect();
        prop_assert_eq!(distinct.len(), n);
    }
}

#[test]
fn ratio_se_reduces_to_binomial_for_unit_clusters() {
    // one trial per cluster: the ratio SE is the binomial SE with an n/(n-1) factor
    let clusters: Vec<(f64, f64)> = (0..100).map(|i| (if i < 30 { 1.0 } else { 0.0 }, 1.0)).collect();
    let se = cluster_ratio_se(&clusters).unwrap();
    let binomial = (0.3f64 * 0.7 / 100.0).sqrt() * (100.0f64 / 99.0).sqrt();
    assert!(close(se, binomial, 1e-12));
    assert_eq!(cluster_ratio_se(&[(1.0, 1.0)]), None);
    assert_eq!(cluster_ratio_se(&[(0.0, 0.0), (0.0, 0.0)]), None);
    let (lo, hi) = binomial_ci(0.85, 400, Z_99);
    assert!(close(hi - 0.85, 0.85 - lo, 1e-12) && lo > 0.8 && hi < 0.9);
}
