use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CausalGraph, EdgeRecord, ProvenanceEntry};

use super::OntologyStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditOp {
    AddEdge {
        source: String,
        target: String,
        #[serde(default)]
        weight: Option<f64>,
    },
    RemoveEdge {
        source: String,
        target: String,
    },
    ReverseEdge {
        source: String,
        target: String,
    },
    SetWeight {
        source: String,
        target: String,
        weight: f64,
    },
}

impl EditOp {
    fn endpoints(&self) -> (&str, &str) {
        match self {
            EditOp::AddEdge { source, target, .. }
            | EditOp::RemoveEdge { source, target }
            | EditOp::ReverseEdge { source, target }
            | EditOp::SetWeight { source, target, .. } => (source, target),
        }
    }

    fn action(&self) -> &'static str {
        match self {
            EditOp::AddEdge { .. } => "add_edge",
            EditOp::RemoveEdge { .. } => "remove_edge",
            EditOp::ReverseEdge { .. } => "reverse_edge",
            EditOp::SetWeight { .. } => "set_weight",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdit {
    #[serde(flatten)]
    pub op: EditOp,
    pub author: String,
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionCode {
    Cycle,
    OntologyRelationDenied,
    UnknownEntity,
    SelfLoop,
    DuplicateEdge,
    MissingEdge,
    InvalidWeight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRejection {
    pub code: RejectionCode,
    pub message: String,
    /// Closed cycle witness when `code` is `cycle`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle: Option<Vec<String>>,
}

impl fmt::Display for EditRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

impl std::error::Error for EditRejection {}

fn reject(code: RejectionCode, message: String) -> EditRejection {
    EditRejection { code, message, cycle: None }
}

/// Witness `source -> target -> ... -> source` if adding `source -> target` closes a cycle.
fn cycle_through(g: &CausalGraph, source: &str, target: &str) -> Option<Vec<String>> {
    let (s, t) = (g.index_of(source)?, g.index_of(target)?);
    let back = g.path(t, s)?;
    let mut w = vec![source.to_string()];
    w.extend(back.into_iter().map(|i| g.nodes()[i].clone()));
    Some(w)
}

fn check_weight(w: f64) -> Result<(), EditRejection> {
    if !w.is_finite() || w == 0.0 {
        return Err(reject(RejectionCode::InvalidWeight, format!("weight must be finite and non-zero, got {w}")));
    }
    Ok(())
}

fn check_addition(
    g: &CausalGraph,
    source: &str,
    target: &str,
    ontology: Option<&OntologyStore>,
) -> Result<(), EditRejection> {
    if let Some(o) = ontology {
        if !o.relation_allowed(source, target) {
            let reason = o.deciding_rule(source, target).and_then(|r| r.reason.clone());
            let mut msg = format!("ontology forbids {source} -> {target}");
            if let Some(r) = reason {
                msg.push_str(&format!(": {r}"));
            }
            return Err(reject(RejectionCode::OntologyRelationDenied, msg));
        }
    }
    if let Some(c) = cycle_through(g, source, target) {
        return Err(EditRejection {
            code: RejectionCode::Cycle,
            message: format!("adding {source} -> {target} closes the cycle {}", c.join(" -> ")),
            cycle: Some(c),
        });
    }
    Ok(())
}

fn internal(e: Error) -> EditRejection {
    reject(RejectionCode::InvalidWeight, e.to_string())
}

/// Applies `edit` to a copy of `g`, or explains why it is rejected.
/// `g` itself is never modified.
pub fn validate_edit(
    g: &CausalGraph,
    edit: &GraphEdit,
    ontology: Option<&OntologyStore>,
) -> Result<CausalGraph, EditRejection> {
    let (source, target) = edit.op.endpoints();
    for n in [source, target] {
        if g.index_of(n).is_none() {
            return Err(reject(RejectionCode::UnknownEntity, format!("`{n}` is not a node of the graph")));
        }
    }
    if source == target {
        return Err(reject(RejectionCode::SelfLoop, format!("self-loop on `{source}`")));
    }
    let existing = g.edge(source, target);
    let next = match &edit.op {
        EditOp::AddEdge { weight, .. } => {
            if existing.is_some() {
                return Err(reject(RejectionCode::DuplicateEdge, format!("{source} -> {target} already exists")));
            }
            let w = weight.unwrap_or(1.0);
            check_weight(w)?;
            check_addition(g, source, target, ontology)?;
            g.with_edge(EdgeRecord::manual(source, target, w)).map_err(internal)?
        }
        EditOp::RemoveEdge { .. } => {
            if existing.is_none() {
                return Err(reject(RejectionCode::MissingEdge, format!("no edge {source} -> {target}")));
            }
            g.without_edge(source, target).map_err(internal)?
        }
        EditOp::ReverseEdge { .. } => {
            let Some(e) = existing else {
                return Err(reject(RejectionCode::MissingEdge, format!("no edge {source} -> {target}")));
            };
            if g.edge(target, source).is_some() {
                return Err(reject(RejectionCode::DuplicateEdge, format!("{target} -> {source} already exists")));
            }
            let w = e.weight;
            let removed = g.without_edge(source, target).map_err(internal)?;
            check_addition(&removed, target, source, ontology)?;
            removed.with_edge(EdgeRecord::manual(target, source, w)).map_err(internal)?
        }
        EditOp::SetWeight { weight, .. } => {
            if existing.is_none() {
                return Err(reject(RejectionCode::MissingEdge, format!("no edge {source} -> {target}")));
            }
            check_weight(*weight)?;
            g.without_edge(source, target)
                .and_then(|r| r.with_edge(EdgeRecord::manual(source, target, *weight)))
                .map_err(internal)?
        }
    };
    let detail = match &edit.op {
        EditOp::AddEdge { weight, .. } => format!("{source} -> {target} (weight {})", weight.unwrap_or(1.0)),
        EditOp::SetWeight { weight, .. } => format!("{source} -> {target} (weight {weight})"),
        _ => format!("{source} -> {target}"),
    };
    Ok(next.with_history(ProvenanceEntry {
        action: edit.op.action().to_string(),
        detail,
        author: Some(edit.author.clone()),
        timestamp: Some(edit.timestamp),
    }))
}

/// A base graph plus the log of accepted edits. Version `n` is the base with
/// the first `n` edits applied.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphHistory {
    base: CausalGraph,
    current: CausalGraph,
    log: Vec<GraphEdit>,
}

impl GraphHistory {
    pub fn new(base: CausalGraph) -> Self {
        Self { current: base.clone(), base, log: Vec::new() }
    }

    pub fn version(&self) -> usize {
        self.log.len()
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.current
    }

    pub fn base(&self) -> &CausalGraph {
        &self.base
    }

    pub fn log(&self) -> &[GraphEdit] {
        &self.log
    }

    /// Validates and applies `edit`; on rejection the history is unchanged.
    pub fn apply(&mut self, edit: GraphEdit, ontology: Option<&OntologyStore>) -> Result<usize, EditRejection> {
        self.current = validate_edit(&self.current, &edit, ontology)?;
        self.log.push(edit);
        Ok(self.version())
    }

    /// Graph as of `version`, recomputed from the base.
    pub fn at_version(&self, version: usize) -> Result<CausalGraph> {
        if version > self.log.len() {
            return Err(Error::InvalidArgument(format!("version {version} beyond {}", self.log.len())));
        }
        let mut g = self.base.clone();
        for e in &self.log[..version] {
            g = validate_edit(&g, e, None).map_err(|r| Error::InvalidGraph(r.to_string()))?;
        }
        Ok(g)
    }

    /// One JSON object per line, in application order.
    pub fn log_jsonl(&self) -> String {
        self.log.iter().map(|e| serde_json::to_string(e).expect("edit serializes") + "\n").collect()
    }

    /// Rebuilds a history by replaying a JSON-lines edit log over `base`.
    pub fn replay(base: CausalGraph, jsonl: &str, ontology: Option<&OntologyStore>) -> Result<Self> {
        let mut h = Self::new(base);
        for (i, line) in jsonl.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let edit: GraphEdit = serde_json::from_str(line)
                .map_err(|e| Error::Parse { line: i + 1, column: e.column(), message: e.to_string() })?;
            h.apply(edit, ontology).map_err(|r| Error::InvalidGraph(format!("edit on line {}: {r}", i + 1)))?;
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::load_ontology;
    use crate::model::Provenance;

    fn graph() -> CausalGraph {
        CausalGraph::from_edges(
            vec!["A".into(), "B".into(), "C".into()],
            vec![EdgeRecord::manual("A", "B", 0.5), EdgeRecord::manual("B", "C", 0.7)],
            Provenance::default(),
        )
        .unwrap()
    }

    fn edit(op: EditOp) -> GraphEdit {
        GraphEdit { op, author: "eng".into(), timestamp: 1.0 }
    }

    fn add(s: &str, t: &str) -> GraphEdit {
        edit(EditOp::AddEdge { source: s.into(), target: t.into(), weight: None })
    }

    #[test]
    fn cycle_rejected_with_witness() {
        let g = graph();
        let r = validate_edit(&g, &add("C", "A"), None).unwrap_err();
        assert_eq!(r.code, RejectionCode::Cycle);
        assert_eq!(r.cycle.unwrap(), vec!["C", "A", "B", "C"]);
        assert_eq!(g, graph());
    }

    #[test]
    fn accepted_edit_records_history() {
        let g = validate_edit(&graph(), &add("A", "C"), None).unwrap();
        assert_eq!(g.edge("A", "C").unwrap().weight, 1.0);
        let h = g.provenance().history.last().unwrap();
        assert_eq!(h.action, "add_edge");
        assert_eq!(h.author.as_deref(), Some("eng"));
    }

    #[test]
    fn ontology_denial() {
        let o = load_ontology(
            r#"{"relation_rules": [{"source": "A", "target": "C", "allowed": false, "reason": "no link"}]}"#,
        )
        .unwrap();
        let r = validate_edit(&graph(), &add("A", "C"), Some(&o)).unwrap_err();
        assert_eq!(r.code, RejectionCode::OntologyRelationDenied);
        assert!(r.message.contains("no link"));
    }

    #[test]
    fn reverse_and_errors() {
        let g = validate_edit(&graph(), &edit(EditOp::ReverseEdge { source: "A".into(), target: "B".into() }), None)
            .unwrap();
        assert_eq!(g.edge("B", "A").unwrap().weight, 0.5);
        assert!(g.edge("A", "B").is_none());
        let codes: Vec<_> = [
            add("A", "Z"),
            add("A", "A"),
            add("A", "B"),
            edit(EditOp::RemoveEdge { source: "C".into(), target: "A".into() }),
            edit(EditOp::SetWeight { source: "A".into(), target: "B".into(), weight: f64::NAN }),
        ]
        .iter()
        .map(|e| validate_edit(&graph(), e, None).unwrap_err().code)
        .collect();
        assert_eq!(
            codes,
            vec![
                RejectionCode::UnknownEntity,
                RejectionCode::SelfLoop,
                RejectionCode::DuplicateEdge,
                RejectionCode::MissingEdge,
                RejectionCode::InvalidWeight
            ]
        );
    }

    #[test]
    fn history_replays() {
        let mut h = GraphHistory::new(graph());
        assert_eq!(h.apply(add("A", "C"), None).unwrap(), 1);
        assert!(h.apply(add("C", "A"), None).is_err());
        h.apply(edit(EditOp::SetWeight { source: "A".into(), target: "B".into(), weight: 2.0 }), None).unwrap();
        assert_eq!(h.version(), 2);
        let log = h.log_jsonl();
        let r = GraphHistory::replay(graph(), &log, None).unwrap();
        assert_eq!(r.graph(), h.graph());
        assert_eq!(h.at_version(1).unwrap().edge("A", "B").unwrap().weight, 0.5);
        assert!(log.lines().next().unwrap().contains("\"kind\":\"add_edge\""));
    }
}
