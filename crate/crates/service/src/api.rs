//! HTTP routes. Errors are `{"error": code, "message": text}`.

use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::Stream;
use serde::{Deserialize, Serialize};
use vecorch::harness::CommandReceipt;

use crate::feed::FeedItem;
use crate::run::RunStatus;
use crate::{CommandRequest, RunHandle, Service, StartRequest};

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize, Deserialize)]
struct ErrorBody {
    error: String,
    message: String,
}

impl ApiError {
    pub fn invalid_config(msg: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "invalid_config",
            message: msg.into(),
        }
    }

    pub fn capacity(max: usize) -> Self {
        ApiError {
            status: StatusCode::TOO_MANY_REQUESTS,
            code: "capacity",
            message: format!("{max} run(s) already active"),
        }
    }

    pub fn not_found(id: u64) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            code: "not_found",
            message: format!("no run {id}"),
        }
    }

    pub fn invalid_state(id: u64, status: RunStatus) -> Self {
        ApiError {
            status: StatusCode::CONFLICT,
            code: "invalid_state",
            message: format!("run {id} is {status:?}").to_lowercase(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn body<T>(b: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    b.map(|Json(x)| x).map_err(|e| ApiError::invalid_config(e.body_text()))
}

async fn start(State(s): State<Arc<Service>>, req: Result<Json<StartRequest>, JsonRejection>) -> Result<(StatusCode, Json<RunHandle>), ApiError> {
    let h = s.start(body(req)?).await?;
    Ok((StatusCode::CREATED, Json(h)))
}

async fn list(State(s): State<Arc<Service>>) -> Json<Vec<RunHandle>> {
    Json(s.list().await)
}

async fn status(State(s): State<Arc<Service>>, Path(id): Path<u64>) -> ApiResult<RunHandle> {
    s.status(id).await.map(Json)
}

async fn pause(State(s): State<Arc<Service>>, Path(id): Path<u64>) -> ApiResult<RunHandle> {
    s.pause(id).await.map(Json)
}

async fn resume(State(s): State<Arc<Service>>, Path(id): Path<u64>) -> ApiResult<RunHandle> {
    s.resume(id).await.map(Json)
}

async fn stop(State(s): State<Arc<Service>>, Path(id): Path<u64>) -> ApiResult<RunHandle> {
    s.stop(id).await.map(Json)
}

async fn command(
    State(s): State<Arc<Service>>,
    Path(id): Path<u64>,
    req: Result<Json<CommandRequest>, JsonRejection>,
) -> ApiResult<CommandReceipt> {
    let req = body(req)?;
    s.command(id, req.text).await.map(Json)
}

#[derive(Deserialize)]
struct MetricsQuery {
    replay: Option<usize>,
}

fn event(item: &FeedItem) -> Event {
    let (name, data, id) = match item {
        FeedItem::Slot(r) => ("slot", serde_json::to_string(r.as_ref()), Some(r.slot)),
        FeedItem::End(e) => ("end", serde_json::to_string(e.as_ref()), None),
    };
    let ev = Event::default().event(name).data(data.unwrap_or_else(|e| format!("{{\"error\":\"{e}\"}}")));
    match id {
        Some(slot) => ev.id(slot.to_string()),
        None => ev,
    }
}

async fn metrics(
    State(s): State<Arc<Service>>,
    Path(id): Path<u64>,
    Query(q): Query<MetricsQuery>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let sub = s.subscribe(id, q.replay).await?;
    let stream = futures_util::stream::unfold(sub, |mut sub| async move {
        let item = sub.next().await?;
        Some((Ok(event(&item)), sub))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

async fn health() -> &'static str {
    "ok"
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/runs", post(start).get(list))
        .route("/runs/{id}", get(status))
        .route("/runs/{id}/pause", post(pause))
        .route("/runs/{id}/resume", post(resume))
        .route("/runs/{id}/stop", post(stop))
        .route("/runs/{id}/commands", post(command))
        .route("/runs/{id}/metrics", get(metrics))
        .with_state(service)
}
