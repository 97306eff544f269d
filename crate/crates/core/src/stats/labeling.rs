//! Expert labeling: blind sample export, rater file import and scoring.
//!
//! The export CSV has columns `item_id, subject_kind, subject_text,
//! kc_list, joint_flag, verdict`. Raters fill `verdict` with `agree` or
//! `disagree`; blank means not rated.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::StatsError;
use crate::extraction::ExtractionStore;
use crate::ingest::Dataset;
use crate::model::{ExtractionRecord, SubjectKind};

use super::{cohens_kappa, AgreementResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelingCandidate {
    pub record: ExtractionRecord,
    pub subject_text: String,
}

/// Pairs each stored record with its subject's text. Records whose
/// subject is not in `dataset` are skipped.
pub fn labeling_candidates(dataset: &Dataset, store: &ExtractionStore) -> Vec<LabelingCandidate> {
    let hints: BTreeMap<&str, &str> = dataset
        .hints
        .iter()
        .map(|h| (h.hint.hint_id.as_str(), h.hint.hint_text.as_str()))
        .collect();
    store
        .records()
        .filter_map(|record| {
            let text = match record.subject_kind {
                SubjectKind::Code => dataset.checkpoint(&record.subject_id).map(|c| c.code.as_str()),
                SubjectKind::Hint => hints.get(record.subject_id.as_str()).copied(),
            }?;
            Some(LabelingCandidate {
                record: record.clone(),
                subject_text: text.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelingItem {
    pub item_id: String,
    pub subject_kind: SubjectKind,
    pub subject_id: String,
    pub subject_text: String,
    pub kc_ids: Vec<String>,
    pub joint: bool,
}

/// A drawn sample. Serialized as the sidecar file; carries no extractor
/// identity so the export stays blind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingSample {
    pub seed: u64,
    pub overlap_fraction: f64,
    pub items: Vec<LabelingItem>,
}

impl LabelingSample {
    pub fn joint_count(&self) -> usize {
        self.items.iter().filter(|i| i.joint).count()
    }
}

/// Draws `n` candidates uniformly without replacement and marks
/// `round(n * overlap_fraction)` of them for joint labeling.
pub fn draw_labeling_sample(
    candidates: &[LabelingCandidate],
    n: usize,
    seed: u64,
    overlap_fraction: f64,
) -> Result<LabelingSample, StatsError> {
    if n > candidates.len() {
        return Err(StatsError::SampleTooLarge {
            requested: n,
            available: candidates.len(),
        });
    }
    if !(0.0..=1.0).contains(&overlap_fraction) {
        return Err(StatsError::InvalidArgument(format!(
            "overlap_fraction must be in [0, 1], got {overlap_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = index::sample(&mut rng, candidates.len(), n).into_vec();
    let joint_n = (n as f64 * overlap_fraction).round() as usize;
    let joint: BTreeSet<usize> = index::sample(&mut rng, n, joint_n).into_iter().collect();
    let width = n.to_string().len().max(3);
    let items = picked
        .iter()
        .enumerate()
        .map(|(pos, &idx)| {
            let c = &candidates[idx];
            LabelingItem {
                item_id: format!("L{:0width$}", pos + 1),
                subject_kind: c.record.subject_kind,
                subject_id: c.record.subject_id.clone(),
                subject_text: c.subject_text.clone(),
                kc_ids: c.record.kc_ids.clone(),
                joint: joint.contains(&pos),
            }
        })
        .collect();
    Ok(LabelingSample {
        seed,
        overlap_fraction,
        items,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    item_id: String,
    subject_kind: String,
    subject_text: String,
    kc_list: String,
    joint_flag: String,
    #[serde(default)]
    verdict: String,
}

fn file_err(path: &Path, e: impl std::fmt::Display) -> StatsError {
    StatsError::File(format!("{}: {e}", path.display()))
}

/// Writes the blind export with an empty verdict column.
pub fn write_labeling_csv(sample: &LabelingSample, path: &Path) -> Result<(), StatsError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| file_err(path, e))?;
    for item in &sample.items {
        writer
            .serialize(LabelRow {
                item_id: item.item_id.clone(),
                subject_kind: item.subject_kind.as_str().to_string(),
                subject_text: item.subject_text.clone(),
                kc_list: item.kc_ids.join(";"),
                joint_flag: if item.joint { "1" } else { "0" }.into(),
                verdict: String::new(),
            })
            .map_err(|e| file_err(path, e))?;
    }
    writer.flush().map_err(|e| file_err(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaterLabels {
    pub rater: String,
    /// item id → endorsed
    pub verdicts: BTreeMap<String, bool>,
}

impl RaterLabels {
    pub fn parse_csv(rater: &str, text: &str) -> Result<Self, StatsError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut verdicts = BTreeMap::new();
        for row in reader.deserialize::<LabelRow>() {
            let row = row.map_err(|e| StatsError::File(format!("{rater}: {e}")))?;
            let verdict = row.verdict.trim().to_ascii_lowercase();
            let endorsed = match verdict.as_str() {
                "" => continue,
                "agree" => true,
                "disagree" => false,
                _ => {
                    return Err(StatsError::InvalidVerdict {
                        item_id: row.item_id,
                        verdict: row.verdict,
                    })
                }
            };
            verdicts.insert(row.item_id, endorsed);
        }
        Ok(RaterLabels {
            rater: rater.to_string(),
            verdicts,
        })
    }
}

/// Reads a filled-in rater CSV; the rater is named after the file stem.
pub fn read_rater_csv(path: &Path) -> Result<RaterLabels, StatsError> {
    let text = std::fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let rater = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    RaterLabels::parse_csv(&rater, &text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub rater_a: String,
    pub rater_b: String,
    pub agreement: Option<AgreementResult>,
    pub notice: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub pairs: Vec<PairAgreement>,
    /// Items with at least one verdict.
    pub rated_items: usize,
    /// Items whose majority verdict endorses the extraction; ties do not.
    pub endorsed_items: usize,
    pub accuracy: Option<f64>,
}

pub fn score_labels(sample: &LabelingSample, raters: &[RaterLabels]) -> Result<LabelScore, StatsError> {
    let known: BTreeSet<&str> = sample.items.iter().map(|i| i.item_id.as_str()).collect();
    let unknown: BTreeSet<String> = raters
        .iter()
        .flat_map(|r| r.verdicts.keys())
        .filter(|id| !known.contains(id.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(StatsError::UnknownItems(unknown.into_iter().collect()));
    }

    let mut pairs = Vec::new();
    for (i, a) in raters.iter().enumerate() {
        for b in &raters[i + 1..] {
            let (xs, ys): (Vec<bool>, Vec<bool>) = sample
                .items
                .iter()
                .filter(|item| item.joint)
                .filter_map(|item| Some((*a.verdicts.get(&item.item_id)?, *b.verdicts.get(&item.item_id)?)))
                .unzip();
            let (agreement, notice) = if xs.is_empty() {
                (
                    None,
                    Some(format!(
                        "raters {} and {} share no labeled joint items; kappa skipped",
                        a.rater, b.rater
                    )),
                )
            } else {
                let result = cohens_kappa(&xs, &ys)?;
                let notice = result
                    .cohens_kappa
                    .is_none()
                    .then(|| "expected agreement is 1; kappa undefined".to_string());
                (Some(result), notice)
            };
            pairs.push(PairAgreement {
                rater_a: a.rater.clone(),
                rater_b: b.rater.clone(),
                agreement,
                notice,
            });
        }
    }

    let mut rated_items = 0;
    let mut endorsed_items = 0;
    for item in &sample.items {
        let votes: Vec<bool> = raters
            .iter()
            .filter_map(|r| r.verdicts.get(&item.item_id).copied())
            .collect();
        if votes.is_empty() {
            continue;
        }
        rated_items += 1;
        let yes = votes.iter().filter(|&&v| v).count();
        if 2 * yes > votes.len() {
            endorsed_items += 1;
        }
    }
    Ok(LabelScore {
        pairs,
        rated_items,
        endorsed_items,
        accuracy: (rated_items > 0).then(|| endorsed_items as f64 / rated_items as f64),
    })
}
