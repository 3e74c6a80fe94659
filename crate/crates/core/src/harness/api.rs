//! HTTP control surface for a campaign journal.
//!
//! | method | path | purpose |
//! |---|---|---|
//! | GET | `/api/status` | per-state counts |
//! | GET | `/api/instances?platform=&mode=&level=` | grid instances with their attempts |
//! | GET | `/api/attempts?state=` | attempt summaries |
//! | GET | `/api/attempts/{id}` | prompts, code, logs, transcript, checklist |
//! | POST | `/api/attempts/{id}/verdict` | `{"verdict":"pass"\|"fail","notes":"..."}` |
//! | GET | `/api/report?format=json\|md\|csv&k=` | breakdown with pending counts |
//!
//! Anything else is served from the optional static asset directory.

use std::collections::BTreeMap;
use std::net::{SocketAddr, TcpListener};
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::state::{AttemptRecord, AttemptState, CampaignState};
use super::store::{Store, VerdictRejection};
use super::{VerdictOrigin, VerdictValue};
use crate::metrics::{Outcome, Report, ReportFormat};
use crate::pipeline::SkillsMode;
use crate::platform::PlatformId;
use crate::tasks::Corpus;

pub const DEFAULT_PORT: u16 = 8787;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("could not start the control API: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone)]
pub struct ApiState {
    pub store: Arc<Store>,
    /// Used to show task titles and checklists next to attempts.
    pub corpus: Option<Arc<Corpus>>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

#[derive(Debug, Serialize)]
struct AttemptSummary {
    id: String,
    task: String,
    mode: SkillsMode,
    platform: PlatformId,
    level: u8,
    index: u32,
    state: AttemptState,
    outcome: Option<Outcome>,
}

impl From<&AttemptRecord> for AttemptSummary {
    fn from(a: &AttemptRecord) -> Self {
        Self {
            id: a.id.clone(),
            task: a.instance.task.clone(),
            mode: a.instance.mode,
            platform: a.instance.platform,
            level: a.level,
            index: a.index,
            state: a.state,
            outcome: a.outcome,
        }
    }
}

async fn status(State(st): State<ApiState>) -> Response {
    let body = st.store.read(|s: &CampaignState| {
        let counts: BTreeMap<&str, usize> = s
            .counts()
            .into_iter()
            .map(|(k, v)| (k.as_str(), v))
            .collect();
        let mut outcomes: BTreeMap<String, usize> = ["CF", "BF", "BC"]
            .iter()
            .map(|k| (k.to_string(), 0))
            .collect();
        for a in s.attempts.values() {
            if let Some(o) = a.outcome {
                *outcomes.entry(o.to_string()).or_default() += 1;
            }
        }
        let (instances, per_instance) = s
            .plan
            .as_ref()
            .map_or((0, 0), |p| (p.instances.len(), p.attempts));
        let complete_instances = s
            .instance_results()
            .iter()
            .filter(|r| r.outcomes.iter().all(Option::is_some))
            .count();
        json!({
            "journal": st.store.path().display().to_string(),
            "started": s.plan.is_some(),
            "finished": s.is_finished(),
            "writable": st.store.is_writable(),
            "last_seq": s.last_seq,
            "instances": {
                "total": instances,
                "complete": complete_instances,
                "pending": instances - complete_instances,
            },
            "attempts_per_instance": per_instance,
            "attempts": counts,
            "outcomes": outcomes,
        })
    });
    Json(body).into_response()
}

#[derive(Debug, Deserialize)]
struct InstanceQuery {
    platform: Option<String>,
    mode: Option<String>,
    level: Option<u8>,
}

async fn instances(State(st): State<ApiState>, Query(q): Query<InstanceQuery>) -> Response {
    let platform = match q
        .platform
        .as_deref()
        .map(str::parse::<PlatformId>)
        .transpose()
    {
        Ok(p) => p,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let mode = match q.mode.as_deref().map(str::parse::<SkillsMode>).transpose() {
        Ok(m) => m,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let body = st.store.read(|s| {
        let results = s.instance_results();
        let list: Vec<_> = results
            .iter()
            .filter(|r| platform.is_none_or(|p| r.key.platform == p))
            .filter(|r| mode.is_none_or(|m| r.key.mode == m))
            .filter(|r| q.level.is_none_or(|l| r.level == l))
            .map(|r| {
                let attempts: Vec<AttemptSummary> = (1..=r.outcomes.len() as u32)
                    .filter_map(|i| s.get(&r.key.attempt_id(i)))
                    .map(AttemptSummary::from)
                    .collect();
                json!({
                    "key": r.key.to_string(),
                    "task": r.key.task,
                    "mode": r.key.mode,
                    "platform": r.key.platform,
                    "level": r.level,
                    "outcome_at_1": r.at_k(1),
                    "outcome_at_k": r.at_k(r.outcomes.len()),
                    "attempts": attempts,
                })
            })
            .collect();
        json!(list)
    });
    Json(body).into_response()
}

#[derive(Debug, Deserialize)]
struct AttemptQuery {
    state: Option<String>,
}

async fn attempts(State(st): State<ApiState>, Query(q): Query<AttemptQuery>) -> Response {
    let wanted = match q
        .state
        .as_deref()
        .map(str::parse::<AttemptState>)
        .transpose()
    {
        Ok(s) => s,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let list: Vec<AttemptSummary> = st.store.read(|s| {
        s.ordered()
            .into_iter()
            .filter(|a| wanted.is_none_or(|w| a.state == w))
            .map(AttemptSummary::from)
            .collect()
    });
    Json(list).into_response()
}

async fn attempt(State(st): State<ApiState>, Path(id): Path<String>) -> Response {
    let Some(rec) = st.store.read(|s| s.get(&id).cloned()) else {
        return error(StatusCode::NOT_FOUND, format!("no attempt {id}"));
    };
    let task = st
        .corpus
        .as_ref()
        .and_then(|c| c.get(&rec.instance.task, rec.instance.platform))
        .map(|t| {
            json!({
                "title": t.title,
                "description": t.description,
                "check": t.check,
            })
        });
    let mut body = serde_json::to_value(&rec).expect("attempt records serialize");
    body["task"] = task.unwrap_or(serde_json::Value::Null);
    Json(body).into_response()
}

#[derive(Debug, Deserialize)]
struct VerdictBody {
    verdict: String,
    #[serde(default)]
    notes: String,
    #[serde(default)]
    evaluator: Option<String>,
}

async fn submit_verdict(
    State(st): State<ApiState>,
    Path(id): Path<String>,
    Json(body): Json<VerdictBody>,
) -> Response {
    let value: VerdictValue = match body.verdict.parse() {
        Ok(v) => v,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    if !st.store.is_writable() {
        return error(StatusCode::SERVICE_UNAVAILABLE, "journal is open read-only");
    }
    match st
        .store
        .submit_verdict(&id, value, body.notes, VerdictOrigin::Api, body.evaluator)
    {
        Ok(outcome) => Json(json!({ "id": id, "outcome": outcome })).into_response(),
        Err(e @ VerdictRejection::NotFound(_)) => error(StatusCode::NOT_FOUND, e.to_string()),
        Err(e @ VerdictRejection::Conflict { .. }) => error(StatusCode::CONFLICT, e.to_string()),
        Err(e @ VerdictRejection::Store(_)) => {
            error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
        }
    }
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    format: Option<String>,
    k: Option<usize>,
}

async fn report(State(st): State<ApiState>, Query(q): Query<ReportQuery>) -> Response {
    let format = match q
        .format
        .as_deref()
        .unwrap_or("json")
        .parse::<ReportFormat>()
    {
        Ok(f) => f,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let k = q.k.unwrap_or(1);
    let (results, attempts) = st.store.read(|s| {
        (
            s.instance_results(),
            s.plan.as_ref().map_or(0, |p| p.attempts),
        )
    });
    if k == 0 || (attempts > 0 && k > attempts as usize) {
        return error(
            StatusCode::BAD_REQUEST,
            format!("k must be between 1 and {attempts}"),
        );
    }
    let text = Report::partial(&results, k).emit(format);
    let content_type = match format {
        ReportFormat::Json => "application/json",
        ReportFormat::Csv => "text/csv; charset=utf-8",
        ReportFormat::Markdown => "text/markdown; charset=utf-8",
    };
    ([(header::CONTENT_TYPE, content_type)], text).into_response()
}

/// The API routes, plus static assets from `assets` for everything else.
pub fn router(state: ApiState, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/status", get(status))
        .route("/api/instances", get(instances))
        .route("/api/attempts", get(attempts))
        .route("/api/attempts/:id", get(attempt))
        .route("/api/attempts/:id/verdict", post(submit_verdict))
        .route("/api/report", get(report))
        .with_state(state);
    match assets {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// A running server; dropping the handle leaves it running until
/// [`ServerHandle::shutdown`] is called or the process exits.
pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    pub fn shutdown(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.join_inner()
    }

    /// Blocks until the server stops.
    pub fn join(mut self) -> std::io::Result<()> {
        self.join_inner()
    }

    fn join_inner(&mut self) -> std::io::Result<()> {
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

/// Binds `addr` and serves on a background thread.
pub fn serve(
    state: ApiState,
    addr: SocketAddr,
    assets: Option<PathBuf>,
) -> Result<ServerHandle, ApiError> {
    let listener = TcpListener::bind(addr).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AddrInUse {
            ApiError::PortInUse(addr.port())
        } else {
            ApiError::Io(e)
        }
    })?;
    listener.set_nonblocking(true)?;
    let bound = listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let app = router(state, assets);
    let thread = std::thread::spawn(move || -> std::io::Result<()> {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener)?;
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
        })
    });
    log::info!("control API listening on http://{bound}");
    Ok(ServerHandle {
        addr: bound,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
