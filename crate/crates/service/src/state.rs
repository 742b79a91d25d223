use std::collections::BTreeMap;
use std::sync::Arc;

use causeway_core::discovery::{BootstrapSummary, DiscoveryConfig};
use causeway_core::effects::{total_effects, EffectMatrices};
use causeway_core::knowledge::{GraphHistory, OntologyStore};
use causeway_core::memory::MemoryStore;
use causeway_core::model::FeatureSelection;
use causeway_core::rca::{RcaReport, ToleranceSpec};
use causeway_core::replay::ReplayEvent;
use causeway_core::{CausalGraph, Dataset};
use serde::Serialize;
use tokio::sync::{broadcast, Mutex, RwLock};

use crate::config::ServeOptions;
use crate::error::{ApiError, ApiResult};
use crate::replay::ReplayRuntime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Job {
    pub id: u64,
    pub kind: &'static str,
    pub status: JobStatus,
    /// Graph version produced by a successful job.
    pub version: Option<u64>,
    pub error: Option<String>,
    pub edges: Option<usize>,
}

/// Everything the API mutates. Guarded by one `RwLock`, so graph mutations are serialized.
#[derive(Debug, Default)]
pub struct Session {
    pub dataset: Option<Arc<Dataset>>,
    pub dataset_name: Option<String>,
    pub features: Option<FeatureSelection>,
    pub ontology: Option<OntologyStore>,
    pub tolerances: Option<ToleranceSpec>,
    pub config: DiscoveryConfig,
    pub history: Option<GraphHistory>,
    /// Bumped by every accepted graph change; rejected edits leave it alone.
    pub version: u64,
    effects: Option<(u64, Arc<EffectMatrices>)>,
    pub bootstrap: Option<BootstrapSummary>,
    pub last_rca: Option<RcaReport>,
    pub jobs: BTreeMap<u64, Job>,
    pub next_job: u64,
}

impl Session {
    pub fn new(config: DiscoveryConfig) -> Self {
        Self { config, ..Self::default() }
    }

    pub fn dataset(&self) -> ApiResult<&Arc<Dataset>> {
        self.dataset.as_ref().ok_or_else(|| ApiError::precondition("no dataset loaded; POST /datasets first"))
    }

    pub fn graph(&self) -> ApiResult<&CausalGraph> {
        self.history
            .as_ref()
            .map(GraphHistory::graph)
            .ok_or_else(|| ApiError::precondition("no causal graph; run POST /discover or POST /graph first"))
    }

    pub fn tolerances(&self) -> ApiResult<&ToleranceSpec> {
        self.tolerances
            .as_ref()
            .ok_or_else(|| ApiError::precondition("no tolerances loaded; POST /tolerances or /tolerances/fit first"))
    }

    /// Replaces the graph with a new base and bumps the version.
    pub fn set_graph(&mut self, g: CausalGraph) {
        self.history = Some(GraphHistory::new(g));
        self.version += 1;
        self.last_rca = None;
    }

    /// Effects of the current graph, computed once per version.
    pub fn effects(&mut self) -> ApiResult<Arc<EffectMatrices>> {
        if let Some((v, em)) = &self.effects {
            if *v == self.version {
                return Ok(em.clone());
            }
        }
        let em = Arc::new(total_effects(self.graph()?)?);
        self.effects = Some((self.version, em.clone()));
        Ok(em)
    }

    pub fn running_job(&self) -> Option<u64> {
        self.jobs.values().find(|j| j.status == JobStatus::Running).map(|j| j.id)
    }
}

pub struct Shared {
    pub session: RwLock<Session>,
    pub replay: Mutex<ReplayRuntime>,
    pub events: broadcast::Sender<ReplayEvent>,
    pub memory: Mutex<Option<MemoryStore>>,
    pub options: ServeOptions,
}

#[derive(Clone)]
pub struct AppState(pub Arc<Shared>);

impl std::ops::Deref for AppState {
    type Target = Shared;

    fn deref(&self) -> &Shared {
        &self.0
    }
}
