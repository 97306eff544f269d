//! Exact expected metric values for a synthetic configuration.
//!
//! The missing-KC count of a stream is a Markov chain: from `m` missing
//! out of `m0` initially missing, Bin(m, p_resolve) KCs resolve and
//! Bin(m0 − m, p_regress) resolved ones break again. Expected label counts
//! and checkpoint occupancy follow by propagating the state distribution.

use serde::{Deserialize, Serialize};

use crate::hint_metrics::TOP_K;
use crate::progression::Label;

use super::SynthConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRates {
    /// Expected share of progression pairs per label, indexed green,
    /// yellow, red, pooled over problems.
    pub rq1_submission_shares: [f64; 3],
    pub expected_pairs_per_student: f64,
    pub rq2_top3: f64,
    /// `None` when no hinted checkpoint can have a successor.
    pub rq3_resolved: Option<f64>,
}

impl ExpectedRates {
    pub fn share(&self, label: Label) -> f64 {
        self.rq1_submission_shares[label.index()]
    }
}

fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    choose(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// P(k successes) drawing `draws` from `population` containing `successes`.
fn hypergeometric_pmf(population: usize, successes: usize, draws: usize, k: usize) -> f64 {
    if draws > population || k > successes || draws < k || draws - k > population - successes {
        return 0.0;
    }
    choose(successes, k) * choose(population - successes, draws - k) / choose(population, draws)
}

/// One-step label probabilities (green, yellow, red) with `m` KCs missing
/// and `r` resolved KCs eligible to break again.
pub fn label_probabilities(m: usize, r: usize, p_resolve: f64, p_regress: f64) -> [f64; 3] {
    let mut probs = [0.0; 3];
    for x in 0..=m {
        let px = binomial_pmf(m, x, p_resolve);
        for y in 0..=r {
            let delta = y as i64 - x as i64;
            probs[Label::from_delta(delta).index()] += px * binomial_pmf(r, y, p_regress);
        }
    }
    probs
}

/// Distribution of the next missing count from `m` of `m0`.
fn transition(m: usize, m0: usize, p_resolve: f64, p_regress: f64) -> Vec<f64> {
    let mut next = vec![0.0; m0 + 1];
    for x in 0..=m {
        let px = binomial_pmf(m, x, p_resolve);
        for y in 0..=(m0 - m) {
            next[m - x + y] += px * binomial_pmf(m0 - m, y, p_regress);
        }
    }
    next
}

struct StreamExpectation {
    labels: [f64; 3],
    /// Expected visits to each missing count at checkpoints that have a
    /// successor.
    occupancy: Vec<f64>,
}

fn stream_expectation(m0: usize, config: &SynthConfig) -> StreamExpectation {
    let mut dist = vec![0.0; m0 + 1];
    dist[m0] = 1.0;
    let mut labels = [0.0; 3];
    let mut occupancy = vec![0.0; m0 + 1];
    for _ in 0..config.max_steps {
        let mut next = vec![0.0; m0 + 1];
        for m in 1..=m0 {
            let p = dist[m];
            if p == 0.0 {
                continue;
            }
            occupancy[m] += p;
            let step = label_probabilities(m, m0 - m, config.p_resolve, config.p_regress);
            for (acc, s) in labels.iter_mut().zip(step) {
                *acc += p * s;
            }
            for (acc, t) in next
                .iter_mut()
                .zip(transition(m, m0, config.p_resolve, config.p_regress))
            {
                *acc += p * t;
            }
        }
        // streams that reached zero stop
        dist = next;
        dist[0] = 0.0;
    }
    StreamExpectation { labels, occupancy }
}

/// E[(1 − p)^K] for K ~ Hypergeometric(population, successes, draws).
fn survival_factor(population: usize, successes: usize, draws: usize, p: f64) -> f64 {
    let draws = draws.min(population);
    (0..=draws.min(successes))
        .map(|k| hypergeometric_pmf(population, successes, draws, k) * (1.0 - p).powi(k as i32))
        .sum()
}

/// Probability that a hint planted at a checkpoint with `m` missing
/// addresses at least one KC resolved by the next step.
fn resolution_probability(m: usize, n_kcs: usize, config: &SynthConfig) -> f64 {
    let t = m.min(TOP_K);
    let rest = n_kcs - t;
    let others_missing = m - t;
    let keep = 1.0 - config.p_resolve;
    let total_weight: f64 = config.hint_length_weights.iter().sum();
    let mut p_hit = 0.0;
    for (i, w) in config.hint_length_weights.iter().enumerate() {
        let length = i + 1;
        let top_case = keep * survival_factor(rest, others_missing, length - 1, config.p_resolve);
        let other_case = survival_factor(rest, others_missing, length, config.p_resolve);
        let miss = config.q_top3 * top_case + (1.0 - config.q_top3) * other_case;
        p_hit += w / total_weight * (1.0 - miss);
    }
    p_hit
}

pub fn expected_rates(config: &SynthConfig, n_kcs: usize) -> ExpectedRates {
    let mut labels = [0.0; 3];
    let mut occupancy_weighted = 0.0;
    let mut occupancy_total = 0.0;
    for problem in &config.problems {
        let lo = problem.initial_missing[0].min(n_kcs);
        let hi = problem.initial_missing[1].min(n_kcs);
        let weight = 1.0 / (hi - lo + 1) as f64;
        for m0 in lo..=hi {
            let e = stream_expectation(m0, config);
            for (acc, l) in labels.iter_mut().zip(e.labels) {
                *acc += weight * l;
            }
            for (m, occ) in e.occupancy.iter().enumerate().skip(1) {
                occupancy_total += weight * occ;
                occupancy_weighted += weight * occ * resolution_probability(m, n_kcs, config);
            }
        }
    }
    let total: f64 = labels.iter().sum();
    ExpectedRates {
        rq1_submission_shares: if total > 0.0 {
            labels.map(|l| l / total)
        } else {
            [0.0; 3]
        },
        expected_pairs_per_student: total,
        rq2_top3: config.q_top3,
        rq3_resolved: (occupancy_total > 0.0).then(|| occupancy_weighted / occupancy_total),
    }
}
