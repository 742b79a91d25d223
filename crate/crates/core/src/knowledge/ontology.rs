use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CausalGraph, StabilityTier};
use crate::rca::ToleranceSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entity {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub entity_type: Option<String>,
    #[serde(default)]
    pub unit: Option<String>,
    #[serde(default)]
    pub anomaly_relevance: Option<String>,
}

/// Allow or deny edges between entities. `source` and `target` match an entity
/// name, `type:<entity_type>`, or `*`. The last matching rule wins; edges with
/// no matching rule are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationRule {
    pub source: String,
    pub target: String,
    pub allowed: bool,
    #[serde(default)]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OntologyDocument {
    #[serde(default)]
    entities: Vec<Entity>,
    #[serde(default)]
    relation_rules: Vec<RelationRule>,
    #[serde(default)]
    tolerances: ToleranceSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "OntologyDocument", into = "OntologyDocument")]
pub struct OntologyStore {
    entities: BTreeMap<String, Entity>,
    relation_rules: Vec<RelationRule>,
    tolerances: ToleranceSpec,
}

impl TryFrom<OntologyDocument> for OntologyStore {
    type Error = Error;

    fn try_from(doc: OntologyDocument) -> Result<Self> {
        let mut entities = BTreeMap::new();
        for e in doc.entities {
            if e.name.trim().is_empty() {
                return Err(Error::Schema("entity with an empty name".into()));
            }
            if entities.contains_key(&e.name) {
                return Err(Error::DuplicateEntity(e.name));
            }
            entities.insert(e.name.clone(), e);
        }
        Ok(Self { entities, relation_rules: doc.relation_rules, tolerances: doc.tolerances })
    }
}

impl From<OntologyStore> for OntologyDocument {
    fn from(s: OntologyStore) -> Self {
        OntologyDocument {
            entities: s.entities.into_values().collect(),
            relation_rules: s.relation_rules,
            tolerances: s.tolerances,
        }
    }
}

impl OntologyStore {
    pub fn new(entities: Vec<Entity>, relation_rules: Vec<RelationRule>, tolerances: ToleranceSpec) -> Result<Self> {
        OntologyDocument { entities, relation_rules, tolerances }.try_into()
    }

    pub fn entity(&self, name: &str) -> Option<&Entity> {
        self.entities.get(name)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn relation_rules(&self) -> &[RelationRule] {
        &self.relation_rules
    }

    pub fn tolerances(&self) -> &ToleranceSpec {
        &self.tolerances
    }

    pub fn set_tolerances(&mut self, tolerances: ToleranceSpec) {
        self.tolerances = tolerances;
    }

    fn matches(&self, pattern: &str, name: &str) -> bool {
        if pattern == "*" || pattern == name {
            return true;
        }
        match pattern.strip_prefix("type:") {
            Some(t) => self.entity(name).and_then(|e| e.entity_type.as_deref()) == Some(t),
            None => false,
        }
    }

    /// The rule that decides `source -> target`, if any.
    pub fn deciding_rule(&self, source: &str, target: &str) -> Option<&RelationRule> {
        self.relation_rules
            .iter()
            .rev()
            .find(|r| self.matches(&r.source, source) && self.matches(&r.target, target))
    }

    pub fn relation_allowed(&self, source: &str, target: &str) -> bool {
        self.deciding_rule(source, target).is_none_or(|r| r.allowed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ontology serializes")
    }
}

/// Parses an ontology document; syntax and schema errors carry line and column.
pub fn load_ontology(text: &str) -> Result<OntologyStore> {
    let doc: OntologyDocument = serde_json::from_str(text)
        .map_err(|e| Error::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
    doc.try_into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedNode {
    pub name: String,
    pub annotated: bool,
    pub description: Option<String>,
    pub entity_type: Option<String>,
    pub unit: Option<String>,
    pub anomaly_relevance: Option<String>,
    pub tooltip: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedEdge {
    pub source: String,
    pub target: String,
    pub weight: f64,
    pub stability: f64,
    pub frequency: f64,
    pub tier: StabilityTier,
    pub tooltip: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedGraph {
    pub nodes: Vec<AnnotatedNode>,
    pub edges: Vec<AnnotatedEdge>,
}

/// Attaches ontology metadata to every node; nodes without an entity are
/// marked unannotated rather than rejected.
pub fn annotate_graph(g: &CausalGraph, ontology: &OntologyStore) -> AnnotatedGraph {
    let nodes = g
        .nodes()
        .iter()
        .map(|n| match ontology.entity(n) {
            Some(e) => {
                let mut tooltip = format!("{n}: {}", e.description);
                if let Some(u) = &e.unit {
                    tooltip.push_str(&format!(" [{u}]"));
                }
                AnnotatedNode {
                    name: n.clone(),
                    annotated: true,
                    description: Some(e.description.clone()),
                    entity_type: e.entity_type.clone(),
                    unit: e.unit.clone(),
                    anomaly_relevance: e.anomaly_relevance.clone(),
                    tooltip,
                }
            }
            None => AnnotatedNode {
                name: n.clone(),
                annotated: false,
                description: None,
                entity_type: None,
                unit: None,
                anomaly_relevance: None,
                tooltip: format!("{n} (unannotated)"),
            },
        })
        .collect();
    let edges = g
        .edges()
        .iter()
        .map(|e| AnnotatedEdge {
            source: e.source.clone(),
            target: e.target.clone(),
            weight: e.weight,
            stability: e.stability,
            frequency: e.frequency,
            tier: e.tier,
            tooltip: format!(
                "{} -> {}: weight {:.4}, stability {:.3} ({}), frequency {:.2}",
                e.source,
                e.target,
                e.weight,
                e.stability,
                e.tier.label(),
                e.frequency
            ),
        })
        .collect();
    AnnotatedGraph { nodes, edges }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EdgeRecord, Provenance};

    const DOC: &str = r#"{
  "entities": [
    {"name": "temp", "description": "Motor temperature", "entity_type": "sensor", "unit": "C", "anomaly_relevance": "high"},
    {"name": "cmd", "description": "Speed command", "entity_type": "setpoint"}
  ],
  "relation_rules": [
    {"source": "type:sensor", "target": "type:setpoint", "allowed": false, "reason": "sensors cannot drive setpoints"}
  ]
}"#;

    #[test]
    fn loads_and_checks_rules() {
        let o = load_ontology(DOC).unwrap();
        assert_eq!(o.entity("temp").unwrap().unit.as_deref(), Some("C"));
        assert!(!o.relation_allowed("temp", "cmd"));
        assert!(o.relation_allowed("cmd", "temp"));
        assert!(o.relation_allowed("temp", "other"));
        assert_eq!(load_ontology(&o.to_json()).unwrap(), o);
    }

    #[test]
    fn parse_error_has_position() {
        match load_ontology("{\n  \"entities\": [\n    {\"name\": }\n  ]\n}") {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_entity() {
        let doc = r#"{"entities": [{"name": "a"}, {"name": "a"}]}"#;
        assert!(matches!(load_ontology(doc), Err(Error::DuplicateEntity(n)) if n == "a"));
    }

    #[test]
    fn unannotated_nodes_are_marked() {
        let o = load_ontology(DOC).unwrap();
        let g = CausalGraph::from_edges(
            vec!["cmd".into(), "temp".into(), "x".into()],
            vec![EdgeRecord::manual("cmd", "temp", 0.5)],
            Provenance::default(),
        )
        .unwrap();
        let a = annotate_graph(&g, &o);
        assert!(a.nodes[0].annotated);
        assert!(!a.nodes[2].annotated);
        assert_eq!(a.nodes[2].tooltip, "x (unannotated)");
        assert!(a.edges[0].tooltip.starts_with("cmd -> temp"));
    }
}
