//! Two-sample t-tests, effect size, Cohen's kappa and the expert
//! labeling workflow.

pub mod dist;
pub mod labeling;

use serde::{Deserialize, Serialize};

use crate::error::StatsError;

pub use dist::{t_cdf, t_sf, t_two_sided_p};
pub use labeling::{
    draw_labeling_sample, labeling_candidates, read_rater_csv, score_labels, write_labeling_csv,
    LabelScore, LabelingCandidate, LabelingItem, LabelingSample, PairAgreement, RaterLabels,
};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestVariant {
    #[default]
    Pooled,
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub dof: f64,
    pub p_value_two_sided: f64,
    pub effect_size_r: f64,
    pub variant: TTestVariant,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n − 1 denominator). NaN for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// r = sqrt(t² / (t² + dof)).
pub fn effect_size_r(t: f64, dof: f64) -> f64 {
    let t2 = t * t;
    if t2 == 0.0 {
        return 0.0;
    }
    (t2 / (t2 + dof)).sqrt()
}

/// Two-sample t-test of `a` against `b`; t is positive when mean(a) > mean(b).
pub fn two_sample_t(a: &[f64], b: &[f64], variant: TTestVariant) -> Result<TTestResult, StatsError> {
    for (which, xs) in [("a", a), ("b", b)] {
        if xs.len() < 2 {
            return Err(StatsError::SampleTooSmall {
                which,
                len: xs.len(),
                needed: 2,
            });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a), sample_variance(b));
    let (se, dof) = match variant {
        TTestVariant::Pooled => {
            let dof = na + nb - 2.0;
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / dof;
            ((pooled * (1.0 / na + 1.0 / nb)).sqrt(), dof)
        }
        TTestVariant::Welch => {
            let (sa, sb) = (va / na, vb / nb);
            let dof = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
            ((sa + sb).sqrt(), dof)
        }
    };
    let diff = ma - mb;
    if se == 0.0 {
        if diff != 0.0 {
            return Err(StatsError::ZeroVariance);
        }
        return Ok(TTestResult {
            t_statistic: 0.0,
            dof: if dof.is_nan() { na + nb - 2.0 } else { dof },
            p_value_two_sided: 1.0,
            effect_size_r: 0.0,
            variant,
        });
    }
    let t = diff / se;
    Ok(TTestResult {
        t_statistic: t,
        dof,
        p_value_two_sided: t_two_sided_p(t, dof),
        effect_size_r: effect_size_r(t, dof),
        variant,
    })
}

/// 2×2 confusion counts of two binary raters; "yes" is `true`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub both_yes: u64,
    pub a_yes_b_no: u64,
    pub a_no_b_yes: u64,
    pub both_no: u64,
}

impl ConfusionCounts {
    pub fn n(&self) -> u64 {
        self.both_yes + self.a_yes_b_no + self.a_no_b_yes + self.both_no
    }

    pub fn agreements(&self) -> u64 {
        self.both_yes + self.both_no
    }

    /// Kappa from counts, or `None` when expected agreement is 1.
    pub fn kappa(&self) -> Option<f64> {
        let n = self.n() as i128;
        let a_yes = (self.both_yes + self.a_yes_b_no) as i128;
        let b_yes = (self.both_yes + self.a_no_b_yes) as i128;
        let chance = a_yes * b_yes + (n - a_yes) * (n - b_yes);
        let denom = n * n - chance;
        if n == 0 || denom == 0 {
            return None;
        }
        Some((n * self.agreements() as i128 - chance) as f64 / denom as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub n_items: usize,
    pub percent_agreement: f64,
    /// `None` when the marginals make chance agreement 1.
    pub cohens_kappa: Option<f64>,
    pub counts: ConfusionCounts,
}

pub fn cohens_kappa(ratings_a: &[bool], ratings_b: &[bool]) -> Result<AgreementResult, StatsError> {
    if ratings_a.len() != ratings_b.len() {
        return Err(StatsError::LengthMismatch {
            a: ratings_a.len(),
            b: ratings_b.len(),
        });
    }
    if ratings_a.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut counts = ConfusionCounts::default();
    for (&x, &y) in ratings_a.iter().zip(ratings_b) {
        match (x, y) {
            (true, true) => counts.both_yes += 1,
            (true, false) => counts.a_yes_b_no += 1,
            (false, true) => counts.a_no_b_yes += 1,
            (false, false) => counts.both_no += 1,
        }
    }
    Ok(AgreementResult {
        n_items: ratings_a.len(),
        percent_agreement: counts.agreements() as f64 / counts.n() as f64,
        cohens_kappa: counts.kappa(),
        counts,
    })
}

/// Normal-approximation two-sided binomial confidence interval for a
/// proportion `p` estimated from `n` trials, clamped to [0, 1].
pub fn binomial_ci(p: f64, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let half = z * (p * (1.0 - p) / n as f64).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}

/// Linearized standard error of the ratio estimator Σy / Σx over
/// independent clusters `(y, x)`. `None` with fewer than two clusters or
/// Σx = 0.
pub fn cluster_ratio_se(clusters: &[(f64, f64)]) -> Option<f64> {
    let n = clusters.len();
    let sum_x: f64 = clusters.iter().map(|c| c.1).sum();
    if n < 2 || sum_x == 0.0 {
        return None;
    }
    let ratio = clusters.iter().map(|c| c.0).sum::<f64>() / sum_x;
    let ss: f64 = clusters.iter().map(|(y, x)| (y - ratio * x).powi(2)).sum();
    Some((n as f64 / (n as f64 - 1.0) * ss).sqrt() / sum_x)
}

#[cfg(test)]
mod tests;
