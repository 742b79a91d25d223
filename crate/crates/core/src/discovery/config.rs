use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscoveryMethod {
    Lingam,
    /// Reserved; diffusion-based discovery is not implemented.
    Diffan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    pub method: DiscoveryMethod,
    pub n_bootstrap: usize,
    pub seed: u64,
    /// Minimum stability score `s` for an edge to be retained.
    pub retention_stability: f64,
    /// Minimum fraction of replicates containing the edge.
    pub retention_frequency: f64,
    pub ica_max_iter: usize,
    pub ica_tol: f64,
    /// Minimum |weight| for an edge to count as present in one fit.
    pub prune_threshold: f64,
    /// Whether failed replicates still count in the frequency denominator.
    pub count_failed_replicates: bool,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            method: DiscoveryMethod::Lingam,
            n_bootstrap: 100,
            seed: 0,
            retention_stability: 0.6,
            retention_frequency: 0.5,
            ica_max_iter: 1000,
            ica_tol: 1e-6,
            prune_threshold: 0.05,
            count_failed_replicates: true,
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.method == DiscoveryMethod::Diffan {
            return bad("discovery method `diffan` is reserved and not implemented".into());
        }
        if self.n_bootstrap < 1 {
            return bad("n_bootstrap must be at least 1".into());
        }
        if !(self.retention_stability > 0.0 && self.retention_stability <= 1.0) {
            return bad(format!("retention_stability must be in (0, 1], got {}", self.retention_stability));
        }
        if !(0.0..=1.0).contains(&self.retention_frequency) {
            return bad(format!("retention_frequency must be in [0, 1], got {}", self.retention_frequency));
        }
        if !(self.prune_threshold >= 0.0) {
            return bad("prune_threshold must be non-negative".into());
        }
        if self.ica_max_iter == 0 || !(self.ica_tol > 0.0) {
            return bad("ica_max_iter and ica_tol must be positive".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
