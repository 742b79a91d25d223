//! Counterfactual validation: compare `(a2 - a1) * tau` against the observed
//! conditional-mean change of the target between rows near `a1` and near `a2`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EffectMatrices;
use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "supported")]
    Supported,
    #[serde(rename = "suspect")]
    Suspect,
    #[serde(rename = "insufficient data")]
    InsufficientData,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Supported => "supported",
            Verdict::Suspect => "suspect",
            Verdict::InsufficientData => "insufficient data",
        }
    }

    pub fn interpretation(self, source: &str, target: &str) -> String {
        match self {
            Verdict::Supported => format!("Causal effect from {source} to {target} is well-supported"),
            Verdict::Suspect => "Possible misspecification or unobserved confounding".to_string(),
            Verdict::InsufficientData => format!("Not enough rows near the intervention levels of {source} to test"),
        }
    }
}

/// One pair to test; unset levels default to the quartiles, unset epsilon to `0.25 * std(A)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualSpec {
    pub source: String,
    pub target: String,
    #[serde(default)]
    pub a1: Option<f64>,
    #[serde(default)]
    pub a2: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CounterfactualOptions {
    /// Minimum |tau| for a pair to be tested.
    pub delta: f64,
    /// Matching tolerance in units of the source variable; `None` means `epsilon_std_factor * std(A)`.
    pub epsilon: Option<f64>,
    pub epsilon_std_factor: f64,
    /// Supported iff `error <= max(relative_tolerance * |pred|, target_std_tolerance * std(B))`.
    pub relative_tolerance: f64,
    pub target_std_tolerance: f64,
}

impl Default for CounterfactualOptions {
    fn default() -> Self {
        Self { delta: 0.05, epsilon: None, epsilon_std_factor: 0.25, relative_tolerance: 0.1, target_std_tolerance: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualResult {
    pub source: String,
    pub target: String,
    pub tau: f64,
    pub a1: f64,
    pub a2: f64,
    pub epsilon: f64,
    pub delta_pred: f64,
    pub delta_obs: Option<f64>,
    pub error: Option<f64>,
    pub threshold: f64,
    pub verdict: Verdict,
    pub interpretation: String,
    pub n_baseline: usize,
    pub n_counterfactual: usize,
}

/// First and third quartile of `variable`.
pub fn default_levels(d: &Dataset, variable: &str) -> Result<(f64, f64)> {
    let col = d.column(variable)?;
    if col.len() < 4 {
        return Err(Error::InvalidArgument(format!("`{variable}` needs at least 4 observations for quartiles")));
    }
    let mut sorted = col.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = stats::quantile_sorted(&sorted, 0.25);
    let q3 = stats::quantile_sorted(&sorted, 0.75);
    if q1 == q3 {
        return Err(Error::DegenerateMarginal(variable.to_string()));
    }
    Ok((q1, q3))
}

/// Validates every requested pair (or all pairs with `|tau| > delta` when `pairs` is `None`).
///
/// Results are ordered by (source, target) name.
pub fn counterfactual_validate(
    d: &Dataset,
    em: &EffectMatrices,
    pairs: Option<&[CounterfactualSpec]>,
    opts: &CounterfactualOptions,
) -> Result<Vec<CounterfactualResult>> {
    let specs: Vec<CounterfactualSpec> = match pairs {
        Some(p) => p.to_vec(),
        None => {
            let mut all = Vec::new();
            for a in &em.nodes {
                for b in &em.nodes {
                    if a != b {
                        all.push(CounterfactualSpec { source: a.clone(), target: b.clone(), a1: None, a2: None, epsilon: None });
                    }
                }
            }
            all
        }
    };
    for s in &specs {
        em.index_of(&s.source)?;
        em.index_of(&s.target)?;
        d.column(&s.source)?;
        d.column(&s.target)?;
    }
    let mut tested: Vec<(CounterfactualSpec, f64)> = specs
        .into_iter()
        .filter(|s| s.source != s.target)
        .filter_map(|s| {
            let tau = em.tau(&s.source, &s.target).ok()?;
            (tau.abs() > opts.delta).then_some((s, tau))
        })
        .collect();
    tested.sort_by(|a, b| (&a.0.source, &a.0.target).cmp(&(&b.0.source, &b.0.target)));
    tested.dedup_by(|a, b| a.0.source == b.0.source && a.0.target == b.0.target);

    Ok(tested.par_iter().map(|(spec, tau)| validate_pair(d, spec, *tau, opts)).collect())
}

fn validate_pair(d: &Dataset, spec: &CounterfactualSpec, tau: f64, opts: &CounterfactualOptions) -> CounterfactualResult {
    let a = d.column(&spec.source).expect("checked");
    let b = d.column(&spec.target).expect("checked");
    let epsilon = spec.epsilon.or(opts.epsilon).unwrap_or_else(|| opts.epsilon_std_factor * stats::population_std(a));
    let threshold_floor = opts.target_std_tolerance * stats::population_std(b);

    let levels = match (spec.a1, spec.a2) {
        (Some(a1), Some(a2)) => Ok((a1, a2)),
        (a1, a2) => default_levels(d, &spec.source).map(|(q1, q3)| (a1.unwrap_or(q1), a2.unwrap_or(q3))),
    };
    let insufficient = |a1: f64, a2: f64, nb: usize, nc: usize| {
        let delta_pred = (a2 - a1) * tau;
        CounterfactualResult {
            source: spec.source.clone(),
            target: spec.target.clone(),
            tau,
            a1,
            a2,
            epsilon,
            delta_pred,
            delta_obs: None,
            error: None,
            threshold: (opts.relative_tolerance * delta_pred.abs()).max(threshold_floor),
            verdict: Verdict::InsufficientData,
            interpretation: Verdict::InsufficientData.interpretation(&spec.source, &spec.target),
            n_baseline: nb,
            n_counterfactual: nc,
        }
    };
    let Ok((a1, a2)) = levels else {
        return insufficient(f64::NAN, f64::NAN, 0, 0);
    };

    let (mut sum1, mut n1, mut sum2, mut n2) = (0.0, 0usize, 0.0, 0usize);
    for (x, y) in a.iter().zip(b) {
        if (x - a1).abs() <= epsilon {
            sum1 += y;
            n1 += 1;
        }
        if (x - a2).abs() <= epsilon {
            sum2 += y;
            n2 += 1;
        }
    }
    if n1 == 0 || n2 == 0 {
        return insufficient(a1, a2, n1, n2);
    }
    let delta_pred = (a2 - a1) * tau;
    let delta_obs = sum2 / n2 as f64 - sum1 / n1 as f64;
    let error = (delta_pred - delta_obs).abs();
    let threshold = (opts.relative_tolerance * delta_pred.abs()).max(threshold_floor);
    let verdict = if error <= threshold { Verdict::Supported } else { Verdict::Suspect };
    CounterfactualResult {
        source: spec.source.clone(),
        target: spec.target.clone(),
        tau,
        a1,
        a2,
        epsilon,
        delta_pred,
        delta_obs: Some(delta_obs),
        error: Some(error),
        threshold,
        verdict,
        interpretation: verdict.interpretation(&spec.source, &spec.target),
        n_baseline: n1,
        n_counterfactual: n2,
    }
}

/// CSV with columns `A,B,tau,delta_pred,delta_obs,error,verdict,n_baseline,n_counterfactual`.
pub fn write_counterfactual_csv<W: Write>(results: &[CounterfactualResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["A", "B", "tau", "delta_pred", "delta_obs", "error", "verdict", "n_baseline", "n_counterfactual"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in results {
        w.write_record([
            r.source.clone(),
            r.target.clone(),
            r.tau.to_string(),
            r.delta_pred.to_string(),
            opt(r.delta_obs),
            opt(r.error),
            r.verdict.label().to_string(),
            r.n_baseline.to_string(),
            r.n_counterfactual.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::total_effects;
    use crate::synthetic::{LinearSem, NoiseKind};

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn quartile_levels() {
        let d = Dataset::new(names(&["A"]), vec![vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        assert_eq!(default_levels(&d, "A").unwrap(), (1.75, 3.25));
        let d = Dataset::new(names(&["A"]), vec![vec![0.0, 0.0, 0.0, 10.0]]).unwrap();
        assert_eq!(default_levels(&d, "A").unwrap(), (0.0, 2.5));
        let d = Dataset::new(names(&["A"]), vec![vec![5.0; 6]]).unwrap();
        assert!(matches!(default_levels(&d, "A"), Err(Error::DegenerateMarginal(_))));
    }

    #[test]
    fn linear_sem_is_supported() {
        let sem = LinearSem::from_edges(names(&["A", "B", "C"]), &[(0, 1, 2.0), (1, 2, -1.5)], NoiseKind::Uniform);
        let em = total_effects(&sem.graph()).unwrap();
        let d = sem.sample(10_000, 8);
        let table = counterfactual_validate(&d, &em, None, &CounterfactualOptions::default()).unwrap();
        let pairs: Vec<(&str, &str)> = table.iter().map(|r| (r.source.as_str(), r.target.as_str())).collect();
        assert_eq!(pairs, vec![("A", "B"), ("A", "C"), ("B", "C")]);
        let rel: f64 = table.iter().map(|r| r.error.unwrap() / r.delta_pred.abs()).sum::<f64>() / table.len() as f64;
        assert!(rel <= 0.05, "mean relative error {rel}");
        for r in &table {
            assert_eq!(r.error.unwrap(), (r.delta_pred - r.delta_obs.unwrap()).abs());
            assert_eq!(r.verdict, Verdict::Supported);
        }
    }

    #[test]
    fn small_tau_is_not_tested() {
        let sem = LinearSem::from_edges(names(&["A", "B"]), &[(0, 1, 0.01)], NoiseKind::Uniform);
        let em = total_effects(&sem.graph()).unwrap();
        let table = counterfactual_validate(&sem.sample(100, 1), &em, None, &CounterfactualOptions::default()).unwrap();
        assert!(table.is_empty());
    }

    #[test]
    fn tiny_epsilon_is_insufficient() {
        let sem = LinearSem::from_edges(names(&["A", "B"]), &[(0, 1, 1.0)], NoiseKind::Uniform);
        let em = total_effects(&sem.graph()).unwrap();
        let d = sem.sample(50, 3);
        let spec = CounterfactualSpec { source: "A".into(), target: "B".into(), a1: Some(10.0), a2: Some(20.0), epsilon: Some(1e-9) };
        let table = counterfactual_validate(&d, &em, Some(&[spec]), &CounterfactualOptions::default()).unwrap();
        assert_eq!(table[0].verdict, Verdict::InsufficientData);
        assert_eq!(table[0].n_baseline, 0);
        assert_eq!(table[0].delta_pred, 10.0);
    }

    #[test]
    fn csv_columns() {
        let sem = LinearSem::from_edges(names(&["A", "B"]), &[(0, 1, 1.0)], NoiseKind::Uniform);
        let em = total_effects(&sem.graph()).unwrap();
        let table = counterfactual_validate(&sem.sample(400, 3), &em, None, &CounterfactualOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_counterfactual_csv(&table, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("A,B,tau,delta_pred,delta_obs,error,verdict,n_baseline,n_counterfactual\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
