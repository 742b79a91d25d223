use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::effects::EffectMatrices;
use crate::error::{Error, Result};
use crate::model::{topological_order, Acyclicity, Dataset};
use crate::stats;

use super::tolerance::{DeviationReport, Direction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RcaMethod {
    Causal,
    CorrelationBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcaCandidate {
    pub variable: String,
    pub score: f64,
    pub dev: f64,
    /// `|tau(variable -> target)|` for causal ranking, `|r|` for the baseline.
    pub path_strength: f64,
    pub tau: f64,
    /// Strongest directed path to the target, empty when unavailable.
    pub path: Vec<String>,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcaReport {
    pub target: String,
    pub method: RcaMethod,
    pub cycle_state: Option<String>,
    pub candidates: Vec<RcaCandidate>,
}

impl RcaReport {
    pub fn ranked_variables(&self) -> Vec<String> {
        self.candidates.iter().map(|c| c.variable.clone()).collect()
    }
}

/// Variable with the largest deviation, ties by name. `None` when nothing deviates.
pub fn most_deviant_variable(dev: &DeviationReport) -> Option<String> {
    dev.deviations
        .iter()
        .filter(|d| d.dev > 0.0)
        .max_by(|a, b| a.dev.total_cmp(&b.dev).then_with(|| b.variable.cmp(&a.variable)))
        .map(|d| d.variable.clone())
}

/// Ranks every ancestor `j` of `target` by `|tau(j -> target)| * dev(j)`.
///
/// Ties break by `|tau|`, then by name. `k` truncates the list.
pub fn rank_root_causes(
    dev: &DeviationReport,
    em: &EffectMatrices,
    target: &str,
    k: Option<usize>,
) -> Result<RcaReport> {
    let t = em.index_of(target)?;
    let paths = strongest_paths_to(em, t);
    let mut candidates = Vec::new();
    for (j, name) in em.nodes.iter().enumerate() {
        let tau = em.total[(t, j)];
        if j == t || tau == 0.0 {
            continue;
        }
        let entry = dev.get(name);
        let d = entry.map_or(0.0, |e| e.dev);
        let strength = tau.abs();
        let score = strength * d;
        let path: Vec<String> = paths
            .as_ref()
            .and_then(|p| p[j].as_ref())
            .map(|p| p.iter().map(|&i| em.nodes[i].clone()).collect())
            .unwrap_or_default();
        let via = if path.is_empty() { String::new() } else { format!(" via {}", path.join(" -> ")) };
        let explanation = if score > 0.0 {
            let side = match entry.map(|e| e.direction) {
                Some(Direction::Below) => "below",
                _ => "above",
            };
            format!(
                "{name} is {side} its tolerance band (deviation {d:.4}) and drives {target} with total effect {tau:.4}{via}; score {score:.4}"
            )
        } else if entry.is_none() {
            format!("{name} has no deviation reading; total effect on {target} is {tau:.4}{via}; not a likely root cause")
        } else {
            format!("{name} is within its tolerance band; total effect on {target} is {tau:.4}{via}; not a likely root cause")
        };
        candidates.push(RcaCandidate {
            variable: name.clone(),
            score,
            dev: d,
            path_strength: strength,
            tau,
            path,
            explanation,
        });
    }
    sort_candidates(&mut candidates);
    if let Some(k) = k {
        candidates.truncate(k);
    }
    Ok(RcaReport {
        target: target.to_string(),
        method: RcaMethod::Causal,
        cycle_state: Some(dev.cycle_state.clone()),
        candidates,
    })
}

fn sort_candidates(c: &mut [RcaCandidate]) {
    c.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| b.path_strength.total_cmp(&a.path_strength))
            .then_with(|| a.variable.cmp(&b.variable))
    });
}

/// For each node, the directed path to `target` maximising `|prod of weights|`.
/// `None` overall for cyclic graphs.
fn strongest_paths_to(em: &EffectMatrices, target: usize) -> Option<Vec<Option<Vec<usize>>>> {
    let order = match topological_order(&em.direct) {
        Acyclicity::Order(o) => o,
        Acyclicity::Cycle(_) => return None,
    };
    let p = em.nodes.len();
    let mut best = vec![0.0_f64; p];
    let mut next: Vec<Option<usize>> = vec![None; p];
    best[target] = 1.0;
    // reverse topological order: every child is settled before its parents
    for &j in order.iter().rev() {
        if j == target {
            continue;
        }
        for c in 0..p {
            let w = em.direct[(c, j)];
            if w == 0.0 || best[c] == 0.0 {
                continue;
            }
            let v = w.abs() * best[c];
            if v > best[j] || (v == best[j] && next[j].is_some_and(|n| c < n)) {
                best[j] = v;
                next[j] = Some(c);
            }
        }
    }
    Some(
        (0..p)
            .map(|j| {
                if j == target {
                    return Some(vec![target]);
                }
                next[j]?;
                let mut path = vec![j];
                let mut cur = j;
                while let Some(n) = next[cur] {
                    path.push(n);
                    cur = n;
                }
                Some(path)
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "name")]
pub enum BaselineTarget {
    Variable(String),
    AnomalyIndicator,
}

/// Ranks variables by `|pearson(variable, target)|` over `d`, ties by name.
pub fn correlation_baseline(d: &Dataset, target: &BaselineTarget, k: Option<usize>) -> Result<RcaReport> {
    let (y, label, skip): (Vec<f64>, String, Option<&str>) = match target {
        BaselineTarget::Variable(n) => (d.column(n)?.to_vec(), n.clone(), Some(n.as_str())),
        BaselineTarget::AnomalyIndicator => (
            d.anomaly_indicator().ok_or_else(|| Error::MissingState("dataset has no anomaly labels".into()))?,
            "anomaly_label".to_string(),
            None,
        ),
    };
    let mut candidates: Vec<RcaCandidate> = d
        .variables()
        .iter()
        .zip(d.columns())
        .filter(|(n, _)| Some(n.as_str()) != skip)
        .map(|(n, col)| {
            let r = stats::pearson(col, &y);
            RcaCandidate {
                variable: n.clone(),
                score: r.abs(),
                dev: 0.0,
                path_strength: r.abs(),
                tau: 0.0,
                path: Vec::new(),
                explanation: format!("{n} correlates with {label} at r = {r:.4}"),
            }
        })
        .collect();
    candidates.sort_by(|a, b| match b.score.total_cmp(&a.score) {
        Ordering::Equal => a.variable.cmp(&b.variable),
        o => o,
    });
    if let Some(k) = k {
        candidates.truncate(k);
    }
    Ok(RcaReport { target: label, method: RcaMethod::CorrelationBaseline, cycle_state: None, candidates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::total_effects_from_matrix;
    use crate::rca::{detect_deviations, ToleranceSpec};
    use nalgebra::DMatrix;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    // A -> B (2), B -> C (3), D -> C (1)
    fn chain() -> EffectMatrices {
        let mut b = DMatrix::zeros(4, 4);
        b[(1, 0)] = 2.0;
        b[(2, 1)] = 3.0;
        b[(2, 3)] = 1.0;
        total_effects_from_matrix(names(&["A", "B", "C", "D"]), &b).unwrap()
    }

    fn tol() -> ToleranceSpec {
        let mut t = ToleranceSpec::new();
        for v in ["A", "B", "C", "D"] {
            t = t.with_band(v, "*", 0.0, 10.0).unwrap();
        }
        t
    }

    #[test]
    fn score_is_tau_times_dev() {
        let dev = detect_deviations(&names(&["A", "B", "C", "D"]), &[11.0, 5.0, 20.0, 13.0], &tol(), None).unwrap();
        let r = rank_root_causes(&dev, &chain(), "C", None).unwrap();
        assert_eq!(r.ranked_variables(), names(&["A", "D", "B"]));
        assert!((r.candidates[0].score - 6.0 * 0.1).abs() < 1e-12);
        assert!((r.candidates[1].score - 0.3).abs() < 1e-12);
        assert_eq!(r.candidates[2].score, 0.0);
        assert!(r.candidates[2].explanation.contains("not a likely root cause"));
        assert_eq!(r.candidates[0].path, names(&["A", "B", "C"]));
        assert!(r.candidates[0].explanation.contains("A -> B -> C"));
    }

    #[test]
    fn ties_break_on_tau_then_name() {
        let dev = detect_deviations(&names(&["A", "B", "C", "D"]), &[5.0; 4], &tol(), None).unwrap();
        let r = rank_root_causes(&dev, &chain(), "C", Some(2)).unwrap();
        assert_eq!(r.ranked_variables(), names(&["A", "B"]));
    }

    #[test]
    fn most_deviant() {
        let dev = detect_deviations(&names(&["A", "B", "C", "D"]), &[5.0, 12.0, 12.0, 1.0], &tol(), None).unwrap();
        assert_eq!(most_deviant_variable(&dev).as_deref(), Some("B"));
    }

    #[test]
    fn baseline_orders_by_abs_correlation() {
        let d = Dataset::new(
            names(&["y", "a", "b"]),
            vec![vec![1.0, 2.0, 3.0, 4.0], vec![-1.0, -2.0, -3.0, -4.0], vec![1.0, 0.0, 1.0, 0.0]],
        )
        .unwrap();
        let r = correlation_baseline(&d, &BaselineTarget::Variable("y".into()), None).unwrap();
        assert_eq!(r.ranked_variables(), names(&["a", "b"]));
        assert!((r.candidates[0].score - 1.0).abs() < 1e-12);
    }
}
