use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact ROC AUC via the Mann-Whitney statistic; tied scores earn half credit.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Metric(format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut neg_below, mut twice_u) = (0u128, 0u128);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] != 0 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_u += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    let p = labels.iter().filter(|&&y| y != 0).count() as u128;
    let n = labels.len() as u128 - p;
    if p == 0 || n == 0 {
        return Err(Error::Metric("roc_auc needs both classes".into()));
    }
    Ok(twice_u as f64 / (2 * p * n) as f64)
}

/// Score at or above which the top `q` fraction of `scores` is flagged.
pub fn calibrate_threshold(scores: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Metric(format!("flag rate {q} outside (0, 1)")));
    }
    if scores.is_empty() {
        return Err(Error::Metric("no scores to calibrate on".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = ((q * sorted.len() as f64).round() as usize).clamp(1, sorted.len());
    Ok(sorted[k - 1])
}

/// Fraction of sessions with `score >= threshold`.
pub fn flag_rate(scores: &[f64], threshold: f64) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().filter(|&&s| s >= threshold).count() as f64 / scores.len() as f64
}

/// Recall among fraud sessions when flagging `score >= threshold`.
pub fn recall_at_threshold(scores: &[f64], labels: &[u8], threshold: f64) -> f64 {
    let pos = labels.iter().filter(|&&y| y != 0).count();
    if pos == 0 {
        return 0.0;
    }
    let hit = scores
        .iter()
        .zip(labels)
        .filter(|(s, y)| **y != 0 && **s >= threshold)
        .count();
    hit as f64 / pos as f64
}

/// Recall when flagging the top `q` fraction of these very scores.
pub fn recall_at_flag_rate(scores: &[f64], labels: &[u8], q: f64) -> Result<f64> {
    let thr = calibrate_threshold(scores, q)?;
    Ok(recall_at_threshold(scores, labels, thr))
}

/// Evaluation summary for one split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub positives: usize,
    pub loss: f64,
    pub roc_auc: f64,
    /// Target flag rate used for the threshold.
    pub q: f64,
    pub threshold: f64,
    pub flag_rate: f64,
    pub recall: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_edge_cases() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[1, 1, 0, 0]).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.5; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
        assert!(roc_auc(&[0.1, 0.2], &[1, 1]).is_err());
        assert!(roc_auc(&[0.1], &[1, 0]).is_err());
    }

    #[test]
    fn threshold_on_uniform_grid() {
        let s: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let thr = calibrate_threshold(&s, 0.05).unwrap();
        assert!((thr - 0.95).abs() < 2e-3, "{thr}");
        assert!((flag_rate(&s, thr) - 0.05).abs() <= 1.0 / 1000.0);
        assert!(calibrate_threshold(&s, 1.0).is_err());
        assert!(calibrate_threshold(&s, 0.0).is_err());
    }

    #[test]
    fn recall_monotone_in_q() {
        let s = [0.9, 0.1, 0.8, 0.3, 0.7, 0.2, 0.6];
        let y = [1, 0, 0, 1, 1, 0, 1];
        let mut last = 0.0;
        for q in [0.1, 0.3, 0.5, 0.7, 0.9, 0.999] {
            let r = recall_at_flag_rate(&s, &y, q).unwrap();
            assert!(r >= last);
            last = r;
        }
        assert_eq!(last, 1.0);
    }
}
