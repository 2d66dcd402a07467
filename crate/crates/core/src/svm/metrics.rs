//! ROC AUC from the Mann–Whitney rank statistic with midranks for ties.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Mean of the per-class one-vs-rest AUCs.
    Macro,
    /// Single AUC over all (sample, class) decisions pooled together.
    Micro,
}

/// Binary AUC: probability that a random positive outscores a random
/// negative, ties counting one half.
pub fn auc_binary(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::DimensionMismatch(format!("{} scores for {} labels", scores.len(), positive.len())));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateAuc(format!("{n_pos} positives and {n_neg} negatives")));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Ranks are 1-based; a tie group spanning ranks lo..=hi gets (lo + hi) / 2.
    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let midrank = (start + 1 + end) as f64 / 2.0;
        let positives_in_group = order[start..end].iter().filter(|&&i| positive[i]).count();
        positive_rank_sum += midrank * positives_in_group as f64;
        start = end;
    }
    let n_pos_f = n_pos as f64;
    let u = positive_rank_sum - n_pos_f * (n_pos_f + 1.0) / 2.0;
    Ok(u / (n_pos_f * n_neg as f64))
}

/// One-vs-rest AUC for `n × classes` scores; `labels[i]` is the column index
/// of the true class of sample `i`.
pub fn roc_auc(scores: &Matrix, labels: &[usize], averaging: Averaging) -> Result<f64> {
    let (n, classes) = scores.shape();
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!("{} labels for {n} score rows", labels.len())));
    }
    if classes < 2 {
        return Err(Error::DegenerateAuc("fewer than two classes".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidLabels(format!("class index {bad} out of range for {classes} columns")));
    }
    match averaging {
        Averaging::Macro => {
            let mut total = 0.0;
            for c in 0..classes {
                let column: Vec<f64> = (0..n).map(|i| scores.get(i, c)).collect();
                let positive: Vec<bool> = labels.iter().map(|&l| l == c).collect();
                total += auc_binary(&column, &positive)?;
            }
            Ok(total / classes as f64)
        }
        Averaging::Micro => {
            let pooled: Vec<f64> = scores.as_slice().to_vec();
            let positive: Vec<bool> = (0..n * classes).map(|idx| labels[idx / classes] == idx % classes).collect();
            auc_binary(&pooled, &positive)
        }
    }
}
