//! Causal analysis engine for multivariate industrial sensor data.
//!
//! The crate covers the full offline pipeline:
//!
//! - [`model`]: datasets, causal graphs, feature selection and acyclicity checks
//! - [`discovery`]: ICA-based LiNGAM and bootstrap edge-stability filtering
//! - [`effects`]: total effects, interventions and counterfactual validation
//! - [`rca`]: tolerance deviations, root-cause ranking, baselines and metrics
//! - [`knowledge`]: ontology annotations and validated graph edits
//! - [`qa`] and [`memory`]: competency-question answering and the memory store
//! - [`replay`]: row-by-row replay events for streaming front ends
//! - [`synthetic`]: linear non-Gaussian SEM fixtures with known ground truth

pub mod discovery;
pub mod effects;
pub mod error;
pub mod knowledge;
pub mod memory;
pub mod model;
pub mod qa;
pub mod rca;
pub mod replay;
pub mod stats;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
pub use model::{CausalGraph, Dataset, EdgeOrigin, EdgeRecord, StabilityTier};
