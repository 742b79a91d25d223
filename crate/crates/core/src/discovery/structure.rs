use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CausalGraph;

/// Edge-level agreement between an estimated graph and a reference graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureScore {
    /// Missing + extra + reversed edges, each pair counted once.
    pub shd: usize,
    pub correct: usize,
    pub reversed: usize,
    pub missing: usize,
    pub extra: usize,
    pub estimated_edges: usize,
    pub true_edges: usize,
}

impl StructureScore {
    /// Correctly directed estimated edges over all estimated edges; 1 for an empty estimate.
    pub fn precision(&self) -> f64 {
        if self.estimated_edges == 0 {
            1.0
        } else {
            self.correct as f64 / self.estimated_edges as f64
        }
    }

    /// Correctly directed true edges over all true edges; 1 when there are none.
    pub fn recall(&self) -> f64 {
        if self.true_edges == 0 {
            1.0
        } else {
            self.correct as f64 / self.true_edges as f64
        }
    }
}

/// Compares edge sets by node name; both graphs must have the same nodes.
pub fn compare_structure(truth: &CausalGraph, estimate: &CausalGraph) -> Result<StructureScore> {
    let mut a: Vec<&String> = truth.nodes().iter().collect();
    let mut b: Vec<&String> = estimate.nodes().iter().collect();
    a.sort();
    b.sort();
    if a != b {
        return Err(Error::InvalidArgument("graphs have different node sets".into()));
    }
    let has = |g: &CausalGraph, s: &str, t: &str| g.edge(s, t).is_some();
    let mut score = StructureScore {
        shd: 0,
        correct: 0,
        reversed: 0,
        missing: 0,
        extra: 0,
        estimated_edges: estimate.edges().len(),
        true_edges: truth.edges().len(),
    };
    for (i, x) in a.iter().enumerate() {
        for y in &a[i + 1..] {
            let t = (has(truth, x, y), has(truth, y, x));
            let e = (has(estimate, x, y), has(estimate, y, x));
            if t == e {
                score.correct += usize::from(t.0) + usize::from(t.1);
                continue;
            }
            score.shd += 1;
            match (t, e) {
                ((false, false), _) => score.extra += 1,
                (_, (false, false)) => score.missing += 1,
                _ => score.reversed += 1,
            }
        }
    }
    Ok(score)
}
