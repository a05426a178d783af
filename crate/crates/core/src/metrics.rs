//! Classification metrics on the held-out test set.

use crate::error::{Error, Result};

/// Probabilities at or above this value are predicted positive.
pub const DECISION_THRESHOLD: f64 = 0.5;

fn check_pair(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidInput(format!(
            "{a} predictions for {b} labels"
        )));
    }
    if a == 0 {
        return Err(Error::InvalidInput("metric over an empty set".into()));
    }
    Ok(())
}

pub fn threshold(probabilities: &[f64]) -> Vec<u8> {
    probabilities
        .iter()
        .map(|&p| u8::from(p >= DECISION_THRESHOLD))
        .collect()
}

pub fn accuracy(predictions: &[u8], labels: &[u8]) -> Result<f64> {
    check_pair(predictions.len(), labels.len())?;
    let hits = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// F1 for the positive class as `2TP / (2TP + FP + FN)`; 0 when there are no
/// true positives (precision and recall both 0).
pub fn f1(predictions: &[u8], labels: &[u8]) -> Result<f64> {
    check_pair(predictions.len(), labels.len())?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p == 1, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    Ok((2 * tp) as f64 / (2 * tp + fp + fn_) as f64)
}

/// Mann-Whitney AUC: `(concordant + 0.5 * tied) / (n_pos * n_neg)`.
///
/// Computed from tie-averaged ranks in `O(n log n)`.
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_pair(scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs both positive and negative labels".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of (1-based, tie-averaged) ranks of positives, doubled to stay integral.
    let mut pos_rank_sum_x2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let rank_x2 = (i + 1 + j + 1) as u128;
        let pos_in_tie = order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        pos_rank_sum_x2 += rank_x2 * pos_in_tie;
        i = j + 1;
    }
    let n_pos_u = n_pos as u128;
    let u_x2 = pos_rank_sum_x2 - n_pos_u * (n_pos_u + 1);
    Ok(u_x2 as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}
