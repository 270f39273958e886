//! Request/response API over live verification sessions.
//!
//! All bodies are JSON and carry `"v": 1`. Field names are a frozen contract.
//!
//! `GET /v1/session/{id}/candidates`
//!
//! ```json
//! {"v": 1, "session": "s1", "step": 3, "awaiting": true, "closed": false,
//!  "deadline_ms": 59000, "remaining": 2,
//!  "pending": [{"h": 0, "r": 1, "t": 4, "head": "Paris", "relation": "isCityOf",
//!               "tail": "France", "score": 3.2}],
//!  "verdicts": [{"h": 2, "r": 0, "t": 1, "accepted": true}]}
//! ```
//!
//! Pending candidates are ordered by descending score.
//!
//! `POST /v1/session/{id}/verdicts` with
//! `{"v": 1, "verdicts": [{"h": 0, "r": 1, "t": 4, "accepted": true}]}`
//! answers `{"v": 1, "remaining": 1}`. Re-posting a recorded verdict is a
//! no-op; an opposite verdict or one for a fact that is not pending answers
//! 409 and changes nothing.
//!
//! `GET /v1/session/{id}/progress`
//!
//! ```json
//! {"v": 1, "session": "s1", "step": 3, "completion_ratio": 0.74,
//!  "curve": [{"step": 0, "candidates": 0, "accepted": 0, "known": 70,
//!             "completion_ratio": 0.7}]}
//! ```
//!
//! Errors answer `{"v": 1, "error": "..."}` with 400 (bad body or version),
//! 404 (unknown session), 409 (verdict conflict) or 410 (session closed).

use std::io;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;

use pkgc_core::runner::CurvePoint;
use pkgc_core::verify::{PendingFact, SessionStore, VerdictEntry, VerifyError};

pub const API_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatesResponse {
    pub v: u32,
    pub session: String,
    pub step: usize,
    pub awaiting: bool,
    pub closed: bool,
    pub deadline_ms: Option<u64>,
    pub remaining: usize,
    pub pending: Vec<PendingFact>,
    pub verdicts: Vec<VerdictEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictsRequest {
    pub v: u32,
    pub verdicts: Vec<VerdictEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictsResponse {
    pub v: u32,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressResponse {
    pub v: u32,
    pub session: String,
    pub step: usize,
    pub completion_ratio: f64,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub v: u32,
    pub error: String,
}

struct ApiError(StatusCode, String);

impl From<VerifyError> for ApiError {
    fn from(e: VerifyError) -> Self {
        let code = match e {
            VerifyError::NotFound(_) => StatusCode::NOT_FOUND,
            VerifyError::Closed(_) => StatusCode::GONE,
            VerifyError::Conflict(_) | VerifyError::Busy { .. } => StatusCode::CONFLICT,
        };
        ApiError(code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorResponse { v: API_VERSION, error: self.1 })).into_response()
    }
}

type Store = State<Arc<SessionStore>>;

async fn candidates(State(store): Store, Path(id): Path<String>) -> Result<Json<CandidatesResponse>, ApiError> {
    let s = store.snapshot(&id)?;
    Ok(Json(CandidatesResponse {
        v: API_VERSION,
        session: s.id,
        step: s.step,
        awaiting: s.awaiting,
        closed: s.closed,
        deadline_ms: s.deadline_ms,
        remaining: s.pending.len(),
        pending: s.pending,
        verdicts: s.verdicts,
    }))
}

async fn verdicts(
    State(store): Store,
    Path(id): Path<String>,
    body: Result<Json<VerdictsRequest>, JsonRejection>,
) -> Result<Json<VerdictsResponse>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.body_text()))?;
    if req.v != API_VERSION {
        return Err(ApiError(StatusCode::BAD_REQUEST, format!("unsupported schema version {}", req.v)));
    }
    let remaining = store.post_verdicts(&id, &req.verdicts)?;
    Ok(Json(VerdictsResponse { v: API_VERSION, remaining }))
}

async fn progress(State(store): Store, Path(id): Path<String>) -> Result<Json<ProgressResponse>, ApiError> {
    let s = store.snapshot(&id)?;
    Ok(Json(ProgressResponse {
        v: API_VERSION,
        session: s.id,
        step: s.step,
        completion_ratio: s.curve.last().map_or(0.0, |p| p.completion_ratio),
        curve: s.curve,
    }))
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/v1/session/{id}/candidates", get(candidates))
        .route("/v1/session/{id}/verdicts", post(verdicts))
        .route("/v1/session/{id}/progress", get(progress))
        .with_state(store)
}

/// The API served from a background thread with its own runtime.
pub struct ApiServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl ApiServer {
    /// Binds `addr` (e.g. `127.0.0.1:0`) and starts serving.
    pub fn start(addr: &str, store: Arc<SessionStore>) -> io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(1)
            .enable_io()
            .build()?;
        let listener = runtime.block_on(tokio::net::TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new().name("verify-api".into()).spawn(move || {
            runtime.block_on(async move {
                axum::serve(listener, router(store))
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
            })
        })?;
        Ok(ApiServer {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) -> io::Result<()> {
        self.stop()
    }

    fn stop(&mut self) -> io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("api thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ApiServer {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}
