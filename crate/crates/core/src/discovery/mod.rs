//! Causal discovery: ICA-based LiNGAM hardened by bootstrap edge-stability analysis.

mod assignment;
mod bootstrap;
mod config;
mod ica;
mod lingam;
mod structure;

pub use assignment::min_cost_assignment;
pub use bootstrap::{
    bootstrap_stability, discover, filter_edges, BootstrapEntry, BootstrapSummary, EdgeStatistics,
    ReplicateWeight,
};
pub use config::{DiscoveryConfig, DiscoveryMethod};
pub use ica::{fast_ica, IcaFit};
pub use lingam::{estimate_causal_order, fit_lingam, LingamFit};
pub use structure::{compare_structure, StructureScore};
