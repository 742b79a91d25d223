//! Domain ontology, graph annotation and validated expert edits.

mod edits;
mod ontology;

pub use edits::{validate_edit, EditOp, EditRejection, GraphEdit, GraphHistory, RejectionCode};
pub use ontology::{
    annotate_graph, load_ontology, AnnotatedEdge, AnnotatedGraph, AnnotatedNode, Entity, OntologyStore,
    RelationRule,
};
