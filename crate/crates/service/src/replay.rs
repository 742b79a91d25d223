use std::sync::Arc;

use causeway_core::replay::{EndReason, ReplayEvent, ReplayPlan};
use serde::Serialize;
use tokio::task::JoinHandle;
use tokio::time::Instant;

use crate::error::{ApiError, ApiResult};
use crate::state::Shared;

/// Replay bookkeeping. Events are sent while holding the runtime mutex, so
/// once `stop` returns no further event can be broadcast for that run.
#[derive(Debug, Default)]
pub struct ReplayRuntime {
    /// Incremented on every start and stop; a task whose run id is stale exits.
    run: u64,
    active: bool,
    rate: f64,
    looping: bool,
    rows: usize,
    next_seq: u64,
    task: Option<JoinHandle<()>>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ReplayStatus {
    pub state: &'static str,
    pub rate: Option<f64>,
    pub looping: bool,
    pub rows: usize,
    /// Events emitted so far in the current or last run.
    pub emitted: u64,
}

impl ReplayRuntime {
    pub fn status(&self) -> ReplayStatus {
        ReplayStatus {
            state: if self.active { "streaming" } else { "idle" },
            rate: (self.rate > 0.0).then_some(self.rate),
            looping: self.looping,
            rows: self.rows,
            emitted: self.next_seq,
        }
    }

    pub fn is_active(&self) -> bool {
        self.active
    }
}

pub async fn start(shared: &Arc<Shared>, plan: ReplayPlan) -> ApiResult<ReplayStatus> {
    let mut rt = shared.replay.lock().await;
    if rt.active {
        return Err(ApiError::conflict("already_streaming", "a replay is already running; POST /replay/stop first"));
    }
    rt.run += 1;
    rt.active = true;
    rt.rate = plan.rate();
    rt.looping = plan.looping();
    rt.rows = plan.rows();
    rt.next_seq = 0;
    let run = rt.run;
    let task_shared = shared.clone();
    rt.task = Some(tokio::spawn(async move { run_replay(task_shared, plan, run).await }));
    Ok(rt.status())
}

/// Stops the running replay, emitting a terminal `stopped` event. Idempotent.
pub async fn stop(shared: &Shared) -> ReplayStatus {
    let mut rt = shared.replay.lock().await;
    if rt.active {
        let _ = shared.events.send(ReplayEvent::End { seq: rt.next_seq, reason: EndReason::Stopped });
        rt.active = false;
        rt.run += 1;
        if let Some(t) = rt.task.take() {
            t.abort();
        }
    }
    rt.status()
}

async fn run_replay(shared: Arc<Shared>, plan: ReplayPlan, run: u64) {
    let start = Instant::now();
    let mut seq = 0u64;
    loop {
        tokio::time::sleep_until(start + plan.due(seq)).await;
        let Some(event) = plan.event(seq) else { break };
        let mut rt = shared.replay.lock().await;
        if rt.run != run {
            return;
        }
        let end = event.is_end();
        // no receivers is fine: the stream keeps its schedule regardless
        let _ = shared.events.send(event);
        if end {
            rt.active = false;
            rt.task = None;
            return;
        }
        rt.next_seq = seq + 1;
        drop(rt);
        seq += 1;
    }
}
