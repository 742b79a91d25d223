//! Bootstrap edge-stability analysis.
//!
//! Every replicate refits LiNGAM on a with-replacement resample. For each
//! ordered pair the weights of the replicates containing that edge are kept,
//! and summarised as mean `w`, population standard deviation `sigma`,
//! stability `s = 1 / (1 + sigma)` and frequency `|W| / N`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lingam::{check_preconditions, fit_with_rng};
use super::DiscoveryConfig;
use crate::error::Result;
use crate::model::{topological_order, Acyclicity, CausalGraph, Dataset, EdgeOrigin, EdgeRecord, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateWeight {
    pub replicate: usize,
    pub weight: f64,
}

/// Summary statistics of one edge's bootstrap weight samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeStatistics {
    pub mean: f64,
    pub std: f64,
    pub stability: f64,
    pub frequency: f64,
}

impl EdgeStatistics {
    /// `samples` must be non-empty; `denominator` is the replicate count used for frequency.
    pub fn from_samples(samples: &[f64], denominator: usize) -> Self {
        assert!(!samples.is_empty(), "edge statistics need at least one sample");
        let k = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / k;
        let std = (samples.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / k).sqrt();
        let frequency = if denominator == 0 { 0.0 } else { (samples.len() as f64 / denominator as f64).min(1.0) };
        Self { mean, std, stability: 1.0 / (1.0 + std), frequency }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEntry {
    pub source: String,
    pub target: String,
    pub samples: Vec<ReplicateWeight>,
    #[serde(flatten)]
    pub stats: EdgeStatistics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub nodes: Vec<String>,
    pub n_bootstrap: usize,
    pub failed_replicates: Vec<usize>,
    /// Replicate count used as the frequency denominator.
    pub denominator: usize,
    /// Only pairs seen in at least one replicate, ordered by (source, target) index.
    pub entries: Vec<BootstrapEntry>,
    pub config: DiscoveryConfig,
}

impl BootstrapSummary {
    /// Aggregates per-replicate weight matrices; `None` marks a failed replicate.
    pub fn from_replicates(
        nodes: Vec<String>,
        replicates: &[Option<DMatrix<f64>>],
        cfg: &DiscoveryConfig,
    ) -> Self {
        let p = nodes.len();
        let mut logs: BTreeMap<(usize, usize), Vec<ReplicateWeight>> = BTreeMap::new();
        let mut failed = Vec::new();
        for (r, rep) in replicates.iter().enumerate() {
            let Some(b) = rep else {
                failed.push(r);
                continue;
            };
            for s in 0..p {
                for t in 0..p {
                    let w = b[(t, s)];
                    if w != 0.0 && w.abs() >= cfg.prune_threshold {
                        logs.entry((s, t)).or_default().push(ReplicateWeight { replicate: r, weight: w });
                    }
                }
            }
        }
        let n = replicates.len();
        let denominator = if cfg.count_failed_replicates { n } else { n - failed.len() };
        let entries = logs
            .into_iter()
            .map(|((s, t), samples)| {
                let ws: Vec<f64> = samples.iter().map(|x| x.weight).collect();
                BootstrapEntry {
                    source: nodes[s].clone(),
                    target: nodes[t].clone(),
                    stats: EdgeStatistics::from_samples(&ws, denominator),
                    samples,
                }
            })
            .collect();
        Self { nodes, n_bootstrap: n, failed_replicates: failed, denominator, entries, config: cfg.clone() }
    }

    pub fn entry(&self, source: &str, target: &str) -> Option<&BootstrapEntry> {
        self.entries.iter().find(|e| e.source == source && e.target == target)
    }
}

/// Runs `cfg.n_bootstrap` LiNGAM fits on resamples; replicate `i` is seeded with `cfg.seed + i`.
pub fn bootstrap_stability(d: &Dataset, cfg: &DiscoveryConfig) -> Result<BootstrapSummary> {
    cfg.validate()?;
    check_preconditions(d)?;
    let n = d.rows();
    let replicates: Vec<Option<DMatrix<f64>>> = (0..cfg.n_bootstrap)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let resample = d.take_rows(&idx);
            match fit_with_rng(&resample, cfg, &mut rng) {
                Ok(fit) => Some(fit.graph.weights().clone()),
                Err(e) => {
                    tracing::warn!(replicate = i, error = %e, "bootstrap replicate failed");
                    None
                }
            }
        })
        .collect();
    Ok(BootstrapSummary::from_replicates(d.variables().to_vec(), &replicates, cfg))
}

/// Keeps edges with `s >= retention_stability` and `frequency >= retention_frequency`,
/// then breaks any cycle by dropping its lowest-stability edge.
pub fn filter_edges(summary: &BootstrapSummary, cfg: &DiscoveryConfig) -> Result<CausalGraph> {
    let nodes = summary.nodes.clone();
    let p = nodes.len();
    let mut kept: Vec<&BootstrapEntry> = summary
        .entries
        .iter()
        .filter(|e| e.stats.stability >= cfg.retention_stability && e.stats.frequency >= cfg.retention_frequency)
        .collect();

    let index = |name: &str| nodes.iter().position(|n| n == name).expect("entry names are nodes");
    let mut history = Vec::new();
    loop {
        let mut b = DMatrix::zeros(p, p);
        for e in &kept {
            b[(index(&e.target), index(&e.source))] = 1.0;
        }
        let Acyclicity::Cycle(cycle) = topological_order(&b) else { break };
        let (pos, weakest) = kept
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                let (s, t) = (index(&e.source), index(&e.target));
                cycle.windows(2).any(|w| w[0] == s && w[1] == t)
            })
            .min_by(|(_, a), (_, b)| {
                a.stats
                    .stability
                    .total_cmp(&b.stats.stability)
                    .then(a.stats.frequency.total_cmp(&b.stats.frequency))
                    .then((&b.source, &b.target).cmp(&(&a.source, &a.target)))
            })
            .expect("cycle edges are retained edges");
        history.push(format!("{}->{} (s={})", weakest.source, weakest.target, weakest.stats.stability));
        kept.remove(pos);
    }

    let edges = kept
        .iter()
        .map(|e| {
            EdgeRecord::new(
                e.source.clone(),
                e.target.clone(),
                e.stats.mean,
                e.stats.std,
                e.stats.frequency,
                EdgeOrigin::Bootstrap,
            )
        })
        .collect();
    let mut provenance = Provenance::new(
        "lingam",
        serde_json::json!({
            "config": cfg.to_json(),
            "n_bootstrap": summary.n_bootstrap,
            "failed_replicates": summary.failed_replicates.len(),
        }),
    );
    for h in history {
        provenance.history.push(crate::model::ProvenanceEntry {
            action: "cycle_break".into(),
            detail: format!("removed {h}"),
            author: None,
            timestamp: None,
        });
    }
    CausalGraph::from_edges(nodes, edges, provenance)
}

/// Bootstrap then filter: the full discovery pipeline.
pub fn discover(d: &Dataset, cfg: &DiscoveryConfig) -> Result<(CausalGraph, BootstrapSummary)> {
    let summary = bootstrap_stability(d, cfg)?;
    let graph = filter_edges(&summary, cfg)?;
    Ok((graph, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StabilityTier;
    use crate::synthetic::{LinearSem, NoiseKind};

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    fn single(p: usize, s: usize, t: usize, w: f64) -> Option<DMatrix<f64>> {
        let mut b = DMatrix::zeros(p, p);
        b[(t, s)] = w;
        Some(b)
    }

    #[test]
    fn constant_samples() {
        let reps = vec![single(2, 0, 1, 0.7); 4];
        let sum = BootstrapSummary::from_replicates(names(&["A", "B"]), &reps, &DiscoveryConfig::default());
        let e = sum.entry("A", "B").unwrap();
        assert_eq!(e.stats, EdgeStatistics { mean: 0.7, std: 0.0, stability: 1.0, frequency: 1.0 });
        assert!(sum.entry("B", "A").is_none());
    }

    #[test]
    fn two_sample_hand_computation() {
        let reps = vec![single(2, 0, 1, 1.0), single(2, 0, 1, 3.0)];
        let sum = BootstrapSummary::from_replicates(names(&["A", "B"]), &reps, &DiscoveryConfig::default());
        let e = sum.entry("A", "B").unwrap();
        assert_eq!(e.stats.mean, 2.0);
        assert_eq!(e.stats.std, 1.0);
        assert_eq!(e.stats.stability, 0.5);
        assert_eq!(e.stats.frequency, 1.0);
    }

    #[test]
    fn below_threshold_is_absent_and_failures_count() {
        let reps = vec![single(2, 0, 1, 0.01), None, single(2, 0, 1, 0.5), single(2, 0, 1, 0.5)];
        let cfg = DiscoveryConfig::default();
        let sum = BootstrapSummary::from_replicates(names(&["A", "B"]), &reps, &cfg);
        assert_eq!(sum.failed_replicates, vec![1]);
        assert_eq!(sum.entry("A", "B").unwrap().stats.frequency, 0.5);
        let cfg = DiscoveryConfig { count_failed_replicates: false, ..cfg };
        let sum = BootstrapSummary::from_replicates(names(&["A", "B"]), &reps, &cfg);
        assert_eq!(sum.entry("A", "B").unwrap().stats.frequency, 2.0 / 3.0);
    }

    fn entry(s: &str, t: &str, ws: &[f64], n: usize) -> BootstrapEntry {
        BootstrapEntry {
            source: s.into(),
            target: t.into(),
            samples: ws.iter().enumerate().map(|(i, &w)| ReplicateWeight { replicate: i, weight: w }).collect(),
            stats: EdgeStatistics::from_samples(ws, n),
        }
    }

    fn summary(nodes: &[&str], entries: Vec<BootstrapEntry>) -> BootstrapSummary {
        BootstrapSummary {
            nodes: names(nodes),
            n_bootstrap: 4,
            failed_replicates: vec![],
            denominator: 4,
            entries,
            config: DiscoveryConfig::default(),
        }
    }

    #[test]
    fn retention_and_tiers() {
        // std 0.05 -> s = 0.952..., std 1.0 -> s = 0.5
        let sum = summary(
            &["A", "B", "C"],
            vec![entry("A", "B", &[0.95, 1.05, 0.95, 1.05], 4), entry("B", "C", &[1.0, 3.0, 1.0, 3.0], 4)],
        );
        let g = filter_edges(&sum, &DiscoveryConfig::default()).unwrap();
        assert_eq!(g.edges().len(), 1);
        let e = g.edge("A", "B").unwrap();
        assert_eq!(e.tier, StabilityTier::VeryStrong);
        assert_eq!(e.origin, EdgeOrigin::Bootstrap);
        assert!((e.weight - 1.0).abs() < 1e-15);
    }

    #[test]
    fn frequency_floor() {
        let sum = summary(&["A", "B"], vec![entry("A", "B", &[1.0], 4)]);
        assert!(filter_edges(&sum, &DiscoveryConfig::default()).unwrap().edges().is_empty());
    }

    #[test]
    fn cycle_breaks_on_lowest_stability() {
        // s = 0.9 requires std = 1/9; s = 0.7 requires std = 3/7
        let a = 1.0 / 9.0;
        let b = 3.0 / 7.0;
        let sum = summary(
            &["A", "B"],
            vec![entry("A", "B", &[1.0 - a, 1.0 + a], 2), entry("B", "A", &[1.0 - b, 1.0 + b], 2)],
        );
        let g = filter_edges(&sum, &DiscoveryConfig::default()).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert!(g.edge("A", "B").is_some());
        assert_eq!(g.provenance().history[0].action, "cycle_break");
    }

    #[test]
    fn bootstrap_is_deterministic_and_auditable() {
        let sem = LinearSem::random(4, 0.5, 2, NoiseKind::Uniform);
        let d = sem.sample(600, 2);
        let cfg = DiscoveryConfig { n_bootstrap: 8, seed: 11, ..Default::default() };
        let (g1, s1) = discover(&d, &cfg).unwrap();
        let (g2, _) = discover(&d, &cfg).unwrap();
        assert_eq!(g1.to_json(), g2.to_json());
        assert_eq!(s1.n_bootstrap, 8);
        for e in &s1.entries {
            let ws: Vec<f64> = e.samples.iter().map(|s| s.weight).collect();
            assert_eq!(EdgeStatistics::from_samples(&ws, 8), e.stats);
        }
        let text = serde_json::to_string(&s1).unwrap();
        assert_eq!(serde_json::from_str::<BootstrapSummary>(&text).unwrap(), s1);
    }
}
