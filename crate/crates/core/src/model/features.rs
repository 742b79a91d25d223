use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMethod {
    Manual,
    CorrelationRank,
    VarianceRank,
}

/// How to choose the variables passed on to discovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FeatureRequest {
    Manual { names: Vec<String> },
    CorrelationRank { k: usize },
    VarianceRank { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub method: FeatureMethod,
    pub selected: Vec<String>,
    pub scores: BTreeMap<String, f64>,
}

pub fn select_features(d: &Dataset, request: &FeatureRequest) -> Result<FeatureSelection> {
    match request {
        FeatureRequest::Manual { names } => {
            if names.is_empty() {
                return Err(Error::InvalidArgument("manual selection needs at least one name".into()));
            }
            for n in names {
                d.column(n)?;
            }
            Ok(FeatureSelection {
                method: FeatureMethod::Manual,
                selected: names.clone(),
                scores: names.iter().map(|n| (n.clone(), 1.0)).collect(),
            })
        }
        FeatureRequest::CorrelationRank { k } => {
            check_k(*k, d)?;
            let indicator = d.anomaly_indicator().ok_or_else(|| {
                Error::MissingState("correlation ranking needs an anomaly_label column".into())
            })?;
            // point-biserial correlation is Pearson against the 0/1 indicator
            let scores = d
                .variables()
                .iter()
                .zip(d.columns())
                .map(|(n, c)| (n.clone(), stats::pearson(c, &indicator).abs()))
                .collect();
            Ok(top_k(FeatureMethod::CorrelationRank, scores, *k))
        }
        FeatureRequest::VarianceRank { k } => {
            check_k(*k, d)?;
            let scores = d
                .variables()
                .iter()
                .zip(d.columns())
                .map(|(n, c)| (n.clone(), normalized_variance(c)))
                .collect();
            Ok(top_k(FeatureMethod::VarianceRank, scores, *k))
        }
    }
}

fn check_k(k: usize, d: &Dataset) -> Result<()> {
    if k == 0 || k > d.n_vars() {
        return Err(Error::InvalidArgument(format!("k must be in 1..={}, got {k}", d.n_vars())));
    }
    Ok(())
}

/// Variance after min-max scaling to [0, 1]; zero for constant columns.
fn normalized_variance(column: &[f64]) -> f64 {
    let (lo, hi) = column
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return 0.0;
    }
    let scaled: Vec<f64> = column.iter().map(|v| (v - lo) / (hi - lo)).collect();
    stats::population_variance(&scaled)
}

fn top_k(method: FeatureMethod, scores: BTreeMap<String, f64>, k: usize) -> FeatureSelection {
    let mut ranked: Vec<(&String, f64)> = scores.iter().map(|(n, s)| (n, *s)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let selected = ranked.into_iter().take(k).map(|(n, _)| n.clone()).collect();
    FeatureSelection { method, selected, scores }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn manual_passes_through() {
        let d = Dataset::new(names(&["x1", "x2", "x3"]), vec![vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let sel = select_features(&d, &FeatureRequest::Manual { names: names(&["x1", "x3"]) }).unwrap();
        assert_eq!(sel.selected, names(&["x1", "x3"]));
        assert!(sel.scores.values().all(|&s| s == 1.0));
        assert!(select_features(&d, &FeatureRequest::Manual { names: names(&["nope"]) }).is_err());
    }

    #[test]
    fn constant_variable_ranks_last() {
        let d = Dataset::new(
            names(&["a", "b", "c"]),
            vec![vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 5.0, 5.0, 5.0], vec![0.0, 0.0, 0.0, 9.0]],
        )
        .unwrap();
        let sel = select_features(&d, &FeatureRequest::VarianceRank { k: 3 }).unwrap();
        assert_eq!(sel.scores["b"], 0.0);
        assert_eq!(sel.selected.last().unwrap(), "b");
    }

    #[test]
    fn ties_break_by_name() {
        let d = Dataset::new(names(&["z", "a"]), vec![vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        let sel = select_features(&d, &FeatureRequest::VarianceRank { k: 1 }).unwrap();
        assert_eq!(sel.selected, names(&["a"]));
    }

    #[test]
    fn correlation_rank_finds_indicator_proxy() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 500;
        let indicator: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.2 { 1.0 } else { 0.0 }).collect();
        let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = indicator.iter().map(|i| i + 0.05 * rng.random_range(-1.0..1.0)).collect();
        let x3: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels = indicator.iter().map(|&i| if i > 0.5 { "NoNose".to_string() } else { "normal".to_string() }).collect();
        let d = Dataset::new(names(&["x1", "x2", "x3"]), vec![x1.clone(), x2.clone(), x3.clone()])
            .unwrap()
            .with_anomaly_labels(labels)
            .unwrap();

        // brute force: correlation of every column against the indicator
        let brute: Vec<(String, f64)> = [("x1", &x1), ("x2", &x2), ("x3", &x3)]
            .iter()
            .map(|(n, c)| (n.to_string(), stats::pearson(c, &indicator).abs()))
            .collect();
        let best = brute.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert_eq!(best.0, "x2");

        let sel = select_features(&d, &FeatureRequest::CorrelationRank { k: 1 }).unwrap();
        assert_eq!(sel.selected, names(&["x2"]));
        assert_eq!(sel, select_features(&d, &FeatureRequest::CorrelationRank { k: 1 }).unwrap());
    }

    #[test]
    fn errors() {
        let d = Dataset::new(names(&["a"]), vec![vec![1.0, 2.0]]).unwrap();
        assert!(select_features(&d, &FeatureRequest::VarianceRank { k: 0 }).is_err());
        assert!(select_features(&d, &FeatureRequest::VarianceRank { k: 2 }).is_err());
        assert!(matches!(
            select_features(&d, &FeatureRequest::CorrelationRank { k: 1 }),
            Err(Error::MissingState(_))
        ));
    }
}
