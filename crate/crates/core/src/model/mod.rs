//! Canonical data types shared by every other module.

mod dataset;
mod features;
mod graph;

pub use dataset::{load_dataset, Dataset, LoadOptions, LoadedDataset};
pub use features::{select_features, FeatureMethod, FeatureRequest, FeatureSelection};
pub use graph::{
    check_acyclic, topological_order, Acyclicity, CausalGraph, EdgeOrigin, EdgeRecord,
    GraphDocument, Provenance, ProvenanceEntry, StabilityTier,
};
