use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stability band of an edge, derived from its stability score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityTier {
    #[serde(rename = "very strong")]
    VeryStrong,
    #[serde(rename = "reliable")]
    Reliable,
    #[serde(rename = "moderately stable")]
    ModeratelyStable,
    #[serde(rename = "unstable")]
    Unstable,
    /// Operator-added edge; never scored.
    #[serde(rename = "manual")]
    Manual,
}

impl StabilityTier {
    pub fn from_stability(s: f64) -> Self {
        if s >= 0.9 {
            Self::VeryStrong
        } else if s >= 0.8 {
            Self::Reliable
        } else if s >= 0.6 {
            Self::ModeratelyStable
        } else {
            Self::Unstable
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::VeryStrong => "very strong",
            Self::Reliable => "reliable",
            Self::ModeratelyStable => "moderately stable",
            Self::Unstable => "unstable",
            Self::Manual => "manual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeOrigin {
    SingleFit,
    Bootstrap,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub source: String,
    pub target: String,
    /// Mean bootstrap strength (or the single-fit / manual weight).
    pub weight: f64,
    pub std: f64,
    pub stability: f64,
    pub frequency: f64,
    pub tier: StabilityTier,
    pub origin: EdgeOrigin,
}

impl EdgeRecord {
    pub fn new(
        source: impl Into<String>,
        target: impl Into<String>,
        weight: f64,
        std: f64,
        frequency: f64,
        origin: EdgeOrigin,
    ) -> Self {
        let stability = 1.0 / (1.0 + std);
        let tier = match origin {
            EdgeOrigin::Manual => StabilityTier::Manual,
            _ => StabilityTier::from_stability(stability),
        };
        Self { source: source.into(), target: target.into(), weight, std, stability, frequency, tier, origin }
    }

    pub fn manual(source: impl Into<String>, target: impl Into<String>, weight: f64) -> Self {
        Self::new(source, target, weight, 0.0, 1.0, EdgeOrigin::Manual)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidGraph(format!("edge {}->{}: {m}", self.source, self.target)));
        if !self.weight.is_finite() || self.weight == 0.0 {
            return bad("weight must be finite and nonzero");
        }
        if !(self.std >= 0.0) || !self.std.is_finite() {
            return bad("std must be non-negative");
        }
        if self.stability != 1.0 / (1.0 + self.std) {
            return bad("stability must equal 1/(1+std)");
        }
        if !(0.0..=1.0).contains(&self.frequency) {
            return bad("frequency outside [0,1]");
        }
        let expected = match self.origin {
            EdgeOrigin::Manual => StabilityTier::Manual,
            _ => StabilityTier::from_stability(self.stability),
        };
        if self.tier != expected {
            return bad("tier does not match stability band");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub action: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    #[serde(default)]
    pub config: serde_json::Value,
    #[serde(default)]
    pub history: Vec<ProvenanceEntry>,
}

impl Provenance {
    pub fn new(method: impl Into<String>, config: serde_json::Value) -> Self {
        Self { method: method.into(), config, history: Vec::new() }
    }
}

impl Default for Provenance {
    fn default() -> Self {
        Self::new("manual", serde_json::Value::Null)
    }
}

/// Serialized form of a [`CausalGraph`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDocument {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeRecord>,
    pub provenance: Provenance,
}

/// Weighted causal DAG. `weights[(i, j)]` is the direct effect of node `j` on node `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphDocument", into = "GraphDocument")]
pub struct CausalGraph {
    nodes: Vec<String>,
    weights: DMatrix<f64>,
    edges: Vec<EdgeRecord>,
    provenance: Provenance,
}

impl TryFrom<GraphDocument> for CausalGraph {
    type Error = Error;

    fn try_from(doc: GraphDocument) -> Result<Self> {
        CausalGraph::from_edges(doc.nodes, doc.edges, doc.provenance)
    }
}

impl From<CausalGraph> for GraphDocument {
    fn from(g: CausalGraph) -> Self {
        GraphDocument { nodes: g.nodes, edges: g.edges, provenance: g.provenance }
    }
}

impl CausalGraph {
    /// Builds a graph from edge records, checking every graph invariant.
    pub fn from_edges(nodes: Vec<String>, edges: Vec<EdgeRecord>, provenance: Provenance) -> Result<Self> {
        let mut seen = HashSet::new();
        for n in &nodes {
            if n.trim().is_empty() {
                return Err(Error::InvalidGraph("empty node name".into()));
            }
            if !seen.insert(n.as_str()) {
                return Err(Error::DuplicateVariable(n.clone()));
            }
        }
        let p = nodes.len();
        let mut weights = DMatrix::zeros(p, p);
        let index = |name: &str| {
            nodes
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::InvalidGraph(format!("edge endpoint `{name}` is not a node")))
        };
        for e in &edges {
            e.validate()?;
            let (s, t) = (index(&e.source)?, index(&e.target)?);
            if s == t {
                return Err(Error::InvalidGraph(format!("self loop on `{}`", e.source)));
            }
            if weights[(t, s)] != 0.0 {
                return Err(Error::InvalidGraph(format!("duplicate edge {}->{}", e.source, e.target)));
            }
            weights[(t, s)] = e.weight;
        }
        if let Acyclicity::Cycle(c) = topological_order(&weights) {
            let names: Vec<&str> = c.iter().map(|&i| nodes[i].as_str()).collect();
            return Err(Error::InvalidGraph(format!("cycle {}", names.join(" -> "))));
        }
        let mut g = Self { nodes, weights, edges, provenance };
        g.sort_edges();
        Ok(g)
    }

    /// Builds a graph from a weight matrix; every nonzero entry becomes an edge of `origin`.
    pub fn from_matrix(nodes: Vec<String>, weights: &DMatrix<f64>, origin: EdgeOrigin, provenance: Provenance) -> Result<Self> {
        let p = nodes.len();
        if weights.nrows() != p || weights.ncols() != p {
            return Err(Error::InvalidGraph("weight matrix shape does not match node count".into()));
        }
        let mut edges = Vec::new();
        for s in 0..p {
            for t in 0..p {
                let w = weights[(t, s)];
                if w != 0.0 {
                    edges.push(EdgeRecord::new(nodes[s].clone(), nodes[t].clone(), w, 0.0, 1.0, origin));
                }
            }
        }
        Self::from_edges(nodes, edges, provenance)
    }

    pub fn empty(nodes: Vec<String>) -> Result<Self> {
        Self::from_edges(nodes, Vec::new(), Provenance::default())
    }

    fn sort_edges(&mut self) {
        let idx = |n: &str| self.nodes.iter().position(|x| x == n).unwrap_or(usize::MAX);
        let mut keyed: Vec<_> = self
            .edges
            .drain(..)
            .map(|e| ((idx(&e.source), idx(&e.target)), e))
            .collect();
        keyed.sort_by_key(|(k, _)| *k);
        self.edges = keyed.into_iter().map(|(_, e)| e).collect();
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn edge(&self, source: &str, target: &str) -> Option<&EdgeRecord> {
        self.edges.iter().find(|e| e.source == source && e.target == target)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn parents(&self, node: usize) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&j| self.weights[(node, j)] != 0.0).collect()
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&i| self.weights[(i, node)] != 0.0).collect()
    }

    /// Nodes with a directed path into `node` (excluding `node`).
    pub fn ancestors(&self, node: usize) -> Vec<usize> {
        let mut seen = vec![false; self.n_nodes()];
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            for p in self.parents(v) {
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        (0..self.n_nodes()).filter(|&i| seen[i] && i != node).collect()
    }

    /// Whether a directed path `from -> ... -> to` of length at least one exists.
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        self.ancestors(to).contains(&from)
    }

    /// One directed path from `from` to `to` preferring the lowest node indices, if any.
    pub fn path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        fn dfs(g: &CausalGraph, v: usize, to: usize, path: &mut Vec<usize>, seen: &mut [bool]) -> bool {
            seen[v] = true;
            path.push(v);
            if v == to {
                return true;
            }
            for c in g.children(v) {
                if !seen[c] && dfs(g, c, to, path, seen) {
                    return true;
                }
            }
            path.pop();
            false
        }
        if from == to {
            return None;
        }
        let mut path = Vec::new();
        let mut seen = vec![false; self.n_nodes()];
        dfs(self, from, to, &mut path, &mut seen).then_some(path)
    }

    pub fn check_acyclic(&self) -> Acyclicity<String> {
        check_acyclic(&self.nodes, &self.weights)
    }

    pub(crate) fn with_history(mut self, entry: ProvenanceEntry) -> Self {
        self.provenance.history.push(entry);
        self
    }

    /// Copy with an added edge; fails if the result would violate an invariant.
    pub fn with_edge(&self, edge: EdgeRecord) -> Result<Self> {
        let mut edges = self.edges.clone();
        edges.push(edge);
        Self::from_edges(self.nodes.clone(), edges, self.provenance.clone())
    }

    pub fn without_edge(&self, source: &str, target: &str) -> Result<Self> {
        let edges: Vec<_> = self
            .edges
            .iter()
            .filter(|e| !(e.source == source && e.target == target))
            .cloned()
            .collect();
        if edges.len() == self.edges.len() {
            return Err(Error::InvalidGraph(format!("no edge {source}->{target}")));
        }
        Self::from_edges(self.nodes.clone(), edges, self.provenance.clone())
    }

    pub fn with_node(&self, name: &str) -> Result<Self> {
        let mut nodes = self.nodes.clone();
        nodes.push(name.to_string());
        Self::from_edges(nodes, self.edges.clone(), self.provenance.clone())
    }

    /// Copy without `name` and every edge touching it.
    pub fn without_node(&self, name: &str) -> Result<Self> {
        self.require(name)?;
        let nodes: Vec<_> = self.nodes.iter().filter(|n| *n != name).cloned().collect();
        let edges: Vec<_> = self
            .edges
            .iter()
            .filter(|e| e.source != name && e.target != name)
            .cloned()
            .collect();
        Self::from_edges(nodes, edges, self.provenance.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Result of an acyclicity check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Acyclicity<T> {
    /// A topological order (parents before children).
    Order(Vec<T>),
    /// A closed cycle witness; first and last element are equal.
    Cycle(Vec<T>),
}

impl<T> Acyclicity<T> {
    pub fn is_acyclic(&self) -> bool {
        matches!(self, Acyclicity::Order(_))
    }
}

/// Topological order of the nonzero pattern of `b` (`b[(i, j)] != 0` means `j -> i`).
///
/// Among ready nodes the lowest index is taken first, so an edgeless graph
/// returns insertion order.
pub fn topological_order(b: &DMatrix<f64>) -> Acyclicity<usize> {
    let p = b.nrows();
    let mut indegree: Vec<usize> = (0..p).map(|i| (0..p).filter(|&j| b[(i, j)] != 0.0).count()).collect();
    let mut done = vec![false; p];
    let mut order = Vec::with_capacity(p);
    while order.len() < p {
        let Some(next) = (0..p).find(|&i| !done[i] && indegree[i] == 0) else {
            return Acyclicity::Cycle(find_cycle(b, &done));
        };
        done[next] = true;
        order.push(next);
        for i in 0..p {
            if b[(i, next)] != 0.0 {
                indegree[i] -= 1;
            }
        }
    }
    Acyclicity::Order(order)
}

fn find_cycle(b: &DMatrix<f64>, removed: &[bool]) -> Vec<usize> {
    // Every remaining node has a remaining parent; walk parents until a repeat.
    let p = b.nrows();
    let start = (0..p).find(|&i| !removed[i]).expect("a cycle leaves nodes behind");
    let mut walk = vec![start];
    let mut pos = vec![usize::MAX; p];
    pos[start] = 0;
    let mut v = start;
    loop {
        let parent = (0..p)
            .find(|&j| !removed[j] && b[(v, j)] != 0.0)
            .expect("remaining node has a remaining parent");
        if pos[parent] != usize::MAX {
            // walk follows edges backwards; reverse to get forward direction
            let mut cycle: Vec<usize> = walk[pos[parent]..].to_vec();
            cycle.push(parent);
            cycle.reverse();
            return cycle;
        }
        pos[parent] = walk.len();
        walk.push(parent);
        v = parent;
    }
}

/// [`topological_order`] with node names.
pub fn check_acyclic(nodes: &[String], b: &DMatrix<f64>) -> Acyclicity<String> {
    let name = |v: Vec<usize>| v.into_iter().map(|i| nodes[i].clone()).collect();
    match topological_order(b) {
        Acyclicity::Order(o) => Acyclicity::Order(name(o)),
        Acyclicity::Cycle(c) => Acyclicity::Cycle(name(c)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn matrix(p: usize, edges: &[(usize, usize)]) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(p, p);
        for &(s, t) in edges {
            b[(t, s)] = 1.0;
        }
        b
    }

    #[test]
    fn chain_order() {
        let b = matrix(3, &[(0, 1), (1, 2)]);
        assert_eq!(check_acyclic(&names(&["A", "B", "C"]), &b), Acyclicity::Order(names(&["A", "B", "C"])));
    }

    #[test]
    fn two_cycle_witness() {
        let b = matrix(2, &[(0, 1), (1, 0)]);
        assert_eq!(check_acyclic(&names(&["A", "B"]), &b), Acyclicity::Cycle(names(&["A", "B", "A"])));
    }

    #[test]
    fn longer_cycle_witness_is_closed_and_follows_edges() {
        let b = matrix(4, &[(3, 0), (0, 1), (1, 2), (2, 0)]);
        let Acyclicity::Cycle(c) = topological_order(&b) else { panic!("expected cycle") };
        assert_eq!(c.first(), c.last());
        for w in c.windows(2) {
            assert!(b[(w[1], w[0])] != 0.0, "{w:?} is not an edge");
        }
    }

    #[test]
    fn empty_graph_keeps_insertion_order() {
        let b = DMatrix::zeros(3, 3);
        assert_eq!(topological_order(&b), Acyclicity::Order(vec![0, 1, 2]));
    }

    #[test]
    fn tier_bands() {
        assert_eq!(StabilityTier::from_stability(0.95), StabilityTier::VeryStrong);
        assert_eq!(StabilityTier::from_stability(0.9), StabilityTier::VeryStrong);
        assert_eq!(StabilityTier::from_stability(0.85), StabilityTier::Reliable);
        assert_eq!(StabilityTier::from_stability(0.8), StabilityTier::Reliable);
        assert_eq!(StabilityTier::from_stability(0.6), StabilityTier::ModeratelyStable);
        assert_eq!(StabilityTier::from_stability(0.59), StabilityTier::Unstable);
    }

    #[test]
    fn rejects_cycles_and_self_loops() {
        let n = names(&["A", "B"]);
        let e = |s: &str, t: &str| EdgeRecord::manual(s, t, 1.0);
        assert!(CausalGraph::from_edges(n.clone(), vec![e("A", "B"), e("B", "A")], Provenance::default()).is_err());
        assert!(CausalGraph::from_edges(n.clone(), vec![e("A", "A")], Provenance::default()).is_err());
        assert!(CausalGraph::from_edges(n, vec![e("A", "Z")], Provenance::default()).is_err());
    }

    #[test]
    fn json_round_trip_preserves_matrix() {
        let g = CausalGraph::from_edges(
            names(&["A", "B", "C"]),
            vec![EdgeRecord::new("A", "B", 0.5, 0.1, 0.9, EdgeOrigin::Bootstrap), EdgeRecord::manual("B", "C", 2.0)],
            Provenance::new("lingam", serde_json::json!({"n_bootstrap": 10})),
        )
        .unwrap();
        let back = CausalGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.weights()[(1, 0)], 0.5);
        assert_eq!(back.edge("B", "C").unwrap().tier, StabilityTier::Manual);
    }

    #[test]
    fn rejects_inconsistent_stability_in_json() {
        let text = r#"{"nodes":["A","B"],"edges":[{"source":"A","target":"B","weight":1.0,"std":1.0,
            "stability":0.9,"frequency":1.0,"tier":"very strong","origin":"bootstrap"}],
            "provenance":{"method":"lingam"}}"#;
        assert!(CausalGraph::from_json(text).is_err());
    }

    #[test]
    fn ancestry_queries() {
        // A->B, B->C, D->B
        let g = CausalGraph::from_edges(
            names(&["A", "B", "C", "D"]),
            vec![EdgeRecord::manual("A", "B", 1.0), EdgeRecord::manual("B", "C", 1.0), EdgeRecord::manual("D", "B", 1.0)],
            Provenance::default(),
        )
        .unwrap();
        assert_eq!(g.parents(1), vec![0, 3]);
        assert_eq!(g.ancestors(2), vec![0, 1, 3]);
        assert!(g.reaches(0, 2));
        assert!(!g.reaches(2, 0));
        assert_eq!(g.path(0, 2), Some(vec![0, 1, 2]));
    }
}
