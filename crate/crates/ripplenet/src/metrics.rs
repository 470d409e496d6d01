//! Ranking and classification metrics for click-through-rate evaluation:
//! AUC and accuracy over scored interactions, and precision/recall/F1 at K
//! over per-user recommendation lists.
//!
//! AUC is the probability that a uniformly random positive outscores a
//! uniformly random negative, with ties counted as half a win; it is computed
//! by rank summation in `O(n log n)`. Top-K metrics are macro-averaged over
//! users that have at least one held-out positive, with score ties broken by
//! ascending item id so rankings are deterministic.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::{ItemId, UserId};

/// Everything wrong a metric input can be.
#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no prediction records")]
    Empty,
    #[error("need both classes for AUC: {positives} positives, {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },
    #[error("non-finite score at record {index}")]
    NonFiniteScore { index: usize },
    #[error("top-K cutoff must be at least 1")]
    ZeroK,
    #[error("no user has a held-out positive item")]
    NoEligibleUsers,
}

/// One scored interaction: the model's click probability against the truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRecord {
    pub user: UserId,
    pub item: ItemId,
    pub clicked: bool,
    pub score: f64,
}

/// A user's recommendation inputs: unordered scored candidates (items the
/// user never clicked in training) and the held-out items they did click.
#[derive(Debug, Clone)]
pub struct RankedUser {
    pub candidates: Vec<(ItemId, f64)>,
    pub positives: BTreeSet<ItemId>,
}

/// Macro-averaged top-K quality over the eligible users.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TopKReport {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of users the averages run over.
    pub users: usize,
}

fn check_finite(records: &[PredictionRecord]) -> Result<(), MetricsError> {
    for (index, r) in records.iter().enumerate() {
        if !r.score.is_finite() {
            return Err(MetricsError::NonFiniteScore { index });
        }
    }
    Ok(())
}

/// Area under the ROC curve by rank summation. Tied scores receive their
/// average rank, which charges each positive-negative tie exactly half a win.
pub fn auc(records: &[PredictionRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    check_finite(records)?;
    let positives = records.iter().filter(|r| r.clicked).count();
    let negatives = records.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::SingleClass { positives, negatives });
    }

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].score.total_cmp(&records[b].score));

    // Walk tie groups, assigning each member the group's mean 1-based rank.
    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len()
            && records[order[end]].score == records[order[start]].score
        {
            end += 1;
        }
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            if records[idx].clicked {
                positive_rank_sum += mean_rank;
            }
        }
        start = end;
    }

    let p = positives as f64;
    Ok((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// Fraction of records whose thresholded score agrees with the label:
/// a record counts as correct when `(score >= threshold) == clicked`.
pub fn accuracy(records: &[PredictionRecord], threshold: f64) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    check_finite(records)?;
    let correct = records
        .iter()
        .filter(|r| (r.score >= threshold) == r.clicked)
        .count();
    Ok(correct as f64 / records.len() as f64)
}

/// Precision/recall/F1 at each requested cutoff, macro-averaged over users
/// with at least one positive. Per user: precision = hits / K, recall =
/// hits / |positives|, F1 their harmonic mean (0 when both are 0). Users
/// without positives are left out of the averages entirely.
pub fn top_k_metrics(
    users: &[RankedUser],
    cutoffs: &[usize],
) -> Result<Vec<TopKReport>, MetricsError> {
    if cutoffs.iter().any(|&k| k == 0) {
        return Err(MetricsError::ZeroK);
    }
    let eligible: Vec<&RankedUser> =
        users.iter().filter(|u| !u.positives.is_empty()).collect();
    if eligible.is_empty() {
        return Err(MetricsError::NoEligibleUsers);
    }

    // Rank each user's candidates once: score descending, item id ascending
    // on ties. Every cutoff then reads a prefix of the same ordering.
    let rankings: Vec<Vec<ItemId>> = eligible
        .iter()
        .map(|u| {
            let mut ranked = u.candidates.clone();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            ranked.into_iter().map(|(item, _)| item).collect()
        })
        .collect();

    let mut reports = Vec::with_capacity(cutoffs.len());
    for &k in cutoffs {
        let mut precision_sum = 0.0;
        let mut recall_sum = 0.0;
        let mut f1_sum = 0.0;
        for (user, ranking) in eligible.iter().zip(&rankings) {
            let hits = ranking
                .iter()
                .take(k)
                .filter(|item| user.positives.contains(item))
                .count() as f64;
            let precision = hits / k as f64;
            let recall = hits / user.positives.len() as f64;
            precision_sum += precision;
            recall_sum += recall;
            if hits > 0.0 {
                f1_sum += 2.0 * precision * recall / (precision + recall);
            }
        }
        let n = eligible.len() as f64;
        reports.push(TopKReport {
            k,
            precision: precision_sum / n,
            recall: recall_sum / n,
            f1: f1_sum / n,
            users: eligible.len(),
        });
    }
    Ok(reports)
}
