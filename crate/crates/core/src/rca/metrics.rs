use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean over queries plus the indices of queries whose truth set was empty.
/// Flagged queries contribute 0 to the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub value: f64,
    pub per_query: Vec<f64>,
    pub flagged: Vec<usize>,
}

fn check(predictions: &[Vec<String>], truths: &[Vec<String>], k: Option<usize>) -> Result<()> {
    if predictions.len() != truths.len() {
        return Err(Error::InvalidArgument(format!(
            "{} prediction lists for {} truth sets",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    if k == Some(0) {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    Ok(())
}

fn aggregate(
    predictions: &[Vec<String>],
    truths: &[Vec<String>],
    k: Option<usize>,
    per: impl Fn(&[String], &BTreeSet<&str>) -> f64,
) -> Result<MetricScore> {
    check(predictions, truths, k)?;
    let mut flagged = Vec::new();
    let per_query: Vec<f64> = predictions
        .iter()
        .zip(truths)
        .enumerate()
        .map(|(q, (pred, truth))| {
            let truth: BTreeSet<&str> = truth.iter().map(String::as_str).collect();
            if truth.is_empty() {
                flagged.push(q);
                return 0.0;
            }
            per(dedup(pred).as_slice(), &truth)
        })
        .collect();
    let value = per_query.iter().sum::<f64>() / per_query.len() as f64;
    Ok(MetricScore { value, per_query, flagged })
}

// repeated predictions count once, at their first rank
fn dedup(pred: &[String]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    pred.iter().filter(|p| seen.insert(p.as_str())).cloned().collect()
}

/// Mean average precision; each query's AP is normalised by `min(k, |truth|)`.
pub fn map_at_k(predictions: &[Vec<String>], truths: &[Vec<String>], k: usize) -> Result<MetricScore> {
    aggregate(predictions, truths, Some(k), |pred, truth| {
        let mut hits = 0usize;
        let mut sum = 0.0;
        for (rank, p) in pred.iter().take(k).enumerate() {
            if truth.contains(p.as_str()) {
                hits += 1;
                sum += hits as f64 / (rank + 1) as f64;
            }
        }
        sum / k.min(truth.len()) as f64
    })
}

/// Hits in the top `k` over `min(k, |truth|)`.
pub fn precision_at_k(predictions: &[Vec<String>], truths: &[Vec<String>], k: usize) -> Result<MetricScore> {
    aggregate(predictions, truths, Some(k), |pred, truth| {
        let hits = pred.iter().take(k).filter(|p| truth.contains(p.as_str())).count();
        hits as f64 / k.min(truth.len()) as f64
    })
}

/// Mean reciprocal rank of the first relevant prediction, optionally cut at `k`.
pub fn mrr(predictions: &[Vec<String>], truths: &[Vec<String>], k: Option<usize>) -> Result<MetricScore> {
    aggregate(predictions, truths, k, |pred, truth| {
        pred.iter()
            .take(k.unwrap_or(usize::MAX))
            .position(|p| truth.contains(p.as_str()))
            .map_or(0.0, |r| 1.0 / (r + 1) as f64)
    })
}

/// Jaccard similarity between the top-`k` set and the truth set.
pub fn jaccard(predictions: &[Vec<String>], truths: &[Vec<String>], k: usize) -> Result<MetricScore> {
    aggregate(predictions, truths, Some(k), |pred, truth| {
        let top: BTreeSet<&str> = pred.iter().take(k).map(String::as_str).collect();
        let inter = top.intersection(truth).count();
        let union = top.union(truth).count();
        inter as f64 / union as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn map_hand_values() {
        let s = map_at_k(&[q(&["a", "x", "b"])], &[q(&["a", "b"])], 3).unwrap();
        assert!((s.value - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        let s = map_at_k(&[q(&["a", "b"])], &[q(&["a", "b"])], 2).unwrap();
        assert_eq!(s.value, 1.0);
    }

    #[test]
    fn empty_truth_is_flagged() {
        let s = map_at_k(&[q(&["a"]), q(&["a"])], &[q(&[]), q(&["a"])], 1).unwrap();
        assert_eq!(s.flagged, vec![0]);
        assert_eq!(s.value, 0.5);
    }

    #[test]
    fn mrr_and_precision() {
        let preds = [q(&["x", "a"]), q(&["b", "y"])];
        let truths = [q(&["a"]), q(&["b"])];
        assert_eq!(mrr(&preds, &truths, None).unwrap().value, 0.75);
        assert_eq!(mrr(&preds, &truths, Some(1)).unwrap().value, 0.5);
        assert_eq!(precision_at_k(&preds, &truths, 2).unwrap().value, 1.0);
        assert_eq!(precision_at_k(&preds, &truths, 1).unwrap().value, 0.5);
    }

    #[test]
    fn jaccard_sets() {
        let s = jaccard(&[q(&["a", "b", "c"])], &[q(&["a", "d"])], 2).unwrap();
        assert!((s.value - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        assert!(map_at_k(&[q(&["a"])], &[], 1).is_err());
        assert!(map_at_k(&[q(&["a"])], &[q(&["a"])], 0).is_err());
    }
}
