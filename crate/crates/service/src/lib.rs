//! HTTP API over the causeway engine plus a server-sent-event replay stream.
//!
//! [`router`] builds the axum application around a fresh [`AppState`];
//! [`serve`] binds it to a TCP port. Endpoint schemas are listed in `API.md`.

pub mod config;
pub mod error;
mod handlers;
pub mod replay;
pub mod state;

use std::path::Path;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;
use causeway_core::knowledge::load_ontology;
use causeway_core::memory::MemoryStore;
use causeway_core::model::{load_dataset, LoadOptions};
use causeway_core::rca::ToleranceSpec;
use causeway_core::CausalGraph;
use tokio::sync::{broadcast, Mutex, RwLock};

pub use config::{ServeOptions, DEFAULT_REPLAY_RATE, ENV_PREFIX};
pub use error::{ApiError, ApiResult};
pub use state::AppState;

use state::{Session, Shared};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("{path}: {source}")]
    Preload { path: String, source: causeway_core::Error },
    #[error(transparent)]
    Core(#[from] causeway_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Builds the shared state, opening memory under `state_dir` and preloading `data_dir`.
pub fn build_state(options: ServeOptions) -> Result<AppState, ServeError> {
    options.discovery.validate()?;
    let mut session = Session::new(options.discovery.clone());
    if let Some(dir) = &options.data_dir {
        preload(&mut session, dir)?;
    }
    let memory = match &options.state_dir {
        Some(dir) => Some(MemoryStore::open(dir)?),
        None => None,
    };
    let (events, _) = broadcast::channel(1024);
    Ok(AppState(Arc::new(Shared {
        session: RwLock::new(session),
        replay: Mutex::new(Default::default()),
        events,
        memory: Mutex::new(memory),
        options,
    })))
}

fn preload(s: &mut Session, dir: &Path) -> Result<(), ServeError> {
    let wrap = |p: &Path| {
        let path = p.display().to_string();
        move |source| ServeError::Preload { path, source }
    };
    let read = |name: &str| -> Result<Option<(std::path::PathBuf, String)>, ServeError> {
        let p = dir.join(name);
        if !p.exists() {
            return Ok(None);
        }
        Ok(Some((p.clone(), std::fs::read_to_string(&p)?)))
    };
    if let Some((p, text)) = read("data.csv")? {
        let loaded = load_dataset(text.as_bytes(), &LoadOptions::default()).map_err(wrap(&p))?;
        tracing::info!("preloaded {} rows from {} ({} dropped)", loaded.dataset.rows(), p.display(), loaded.dropped);
        s.dataset = Some(Arc::new(loaded.dataset));
        s.dataset_name = Some("data".into());
    }
    if let Some((p, text)) = read("ontology.json")? {
        let ont = load_ontology(&text).map_err(wrap(&p))?;
        if !ont.tolerances().is_empty() {
            s.tolerances = Some(ont.tolerances().clone());
        }
        s.ontology = Some(ont);
    }
    if let Some((p, text)) = read("tolerances.json")? {
        s.tolerances = Some(ToleranceSpec::from_json(&text).map_err(wrap(&p))?);
    }
    if let Some((p, text)) = read("graph.json")? {
        s.set_graph(CausalGraph::from_json(&text).map_err(wrap(&p))?);
    }
    Ok(())
}

pub fn router(state: AppState) -> Router {
    use handlers::*;
    Router::new()
        .route("/health", get(health))
        .route("/datasets", post(upload_dataset))
        .route("/features", post(select))
        .route("/discover", post(start_discovery))
        .route("/jobs/{id}", get(job))
        .route("/graph", get(get_graph).post(put_graph))
        .route("/graph/edits", post(edit_graph))
        .route("/effects", get(effects))
        .route("/whatif", post(whatif))
        .route("/counterfactuals", post(counterfactuals))
        .route("/rca", post(rca))
        .route("/qa", post(qa))
        .route("/memory", get(recall).post(record))
        .route("/ontology", post(put_ontology))
        .route("/tolerances", post(put_tolerances))
        .route("/tolerances/fit", post(fit))
        .route("/replay/start", post(replay_start))
        .route("/replay/stop", post(replay_stop))
        .route("/replay/status", get(replay_status))
        .route("/stream", get(stream_events))
        .with_state(state)
}

/// Serves until the process is interrupted.
pub async fn serve(options: ServeOptions) -> Result<(), ServeError> {
    let addr = format!("{}:{}", options.host, options.port);
    let app = router(build_state(options)?);
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).with_graceful_shutdown(async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}

/// Builds state for in-process tests; panics on invalid options.
#[doc(hidden)]
pub fn state_for_tests(options: ServeOptions) -> AppState {
    build_state(options).expect("valid test options")
}
