//! HTTP query API.
//!
//! | method | path                      | body / reply                          |
//! |--------|---------------------------|---------------------------------------|
//! | GET    | `/api/health`             | service and tag-link status           |
//! | GET    | `/api/rolls/latest`       | newest roll, 404 if none yet          |
//! | GET    | `/api/rolls?limit=N`      | newest first, default 50, at most 1000 |
//! | GET    | `/api/stats`              | session statistics                    |
//! | POST   | `/api/rolls/{id}/manual`  | `{"grammage": 70}` → statistics       |
//! | GET    | `/api/events`             | server-sent `roll` events             |
//!
//! Errors are `{"error": "<message>"}` with 400, 404, 409 or 422.

use std::convert::Infallible;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::stream::{self, Stream};
use grammage_core::GrammageClass;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast::error::RecvError;

use crate::record::{RollRecord, SessionStats};
use crate::service::{Health, Service};
use crate::PredictorError;

pub const DEFAULT_LIMIT: usize = 50;
pub const MAX_LIMIT: usize = 1000;

/// A record as served: the stored fields plus the mismatch flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollView {
    #[serde(flatten)]
    pub record: RollRecord,
    pub mismatch: bool,
}

impl From<RollRecord> for RollView {
    fn from(record: RollRecord) -> Self {
        RollView {
            mismatch: record.mismatch(),
            record,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsView {
    #[serde(flatten)]
    pub stats: SessionStats,
    pub agreement_rate: Option<f64>,
}

impl From<SessionStats> for StatsView {
    fn from(stats: SessionStats) -> Self {
        StatsView {
            agreement_rate: stats.agreement_rate(),
            stats,
        }
    }
}

#[derive(Debug, Serialize)]
struct HealthView {
    status: &'static str,
    model: &'static str,
    classes: Vec<GrammageClass>,
    rolls_seen: u64,
    #[serde(flatten)]
    link: Health,
}

#[derive(Debug, Deserialize)]
pub struct ManualBody {
    pub grammage: u16,
}

#[derive(Debug, Deserialize)]
struct Limit {
    limit: Option<usize>,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<PredictorError> for ApiError {
    fn from(e: PredictorError) -> Self {
        let code = match e {
            PredictorError::UnknownRoll(_) => StatusCode::NOT_FOUND,
            PredictorError::AlreadyLabeled(_) | PredictorError::DuplicateRoll(_) => StatusCode::CONFLICT,
            PredictorError::NonstandardLabel(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(code, e.to_string())
    }
}

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/rolls", get(rolls))
        .route("/api/rolls/latest", get(latest))
        .route("/api/rolls/{id}/manual", post(manual))
        .route("/api/stats", get(stats))
        .route("/api/events", get(events))
        .with_state(service)
}

async fn health(State(s): State<Service>) -> impl IntoResponse {
    let m = s.model();
    Json(HealthView {
        status: "ok",
        model: m.kind(),
        classes: grammage_core::Classifier::classes(m).to_vec(),
        rolls_seen: s.stats().rolls_seen,
        link: s.health(),
    })
}

async fn latest(State(s): State<Service>) -> Result<Json<RollView>, ApiError> {
    s.latest()
        .map(|r| Json(r.into()))
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, "no rolls yet".into()))
}

async fn rolls(State(s): State<Service>, q: Result<Query<Limit>, axum::extract::rejection::QueryRejection>) -> Result<Json<Vec<RollView>>, ApiError> {
    let Query(q) = q.map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.body_text()))?;
    let limit = q.limit.unwrap_or(DEFAULT_LIMIT).min(MAX_LIMIT);
    Ok(Json(s.recent(limit).into_iter().map(RollView::from).collect()))
}

async fn stats(State(s): State<Service>) -> Json<StatsView> {
    Json(s.stats().into())
}

async fn manual(
    State(s): State<Service>,
    Path(id): Path<String>,
    body: Result<Json<ManualBody>, JsonRejection>,
) -> Result<Json<StatsView>, ApiError> {
    let id: u64 = id
        .parse()
        .map_err(|_| ApiError(StatusCode::BAD_REQUEST, format!("bad roll id {id:?}")))?;
    let Json(body) = body.map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.body_text()))?;
    Ok(Json(s.record_manual(id, body.grammage).await?.into()))
}

async fn events(State(s): State<Service>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = s.subscribe();
    let stream = stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(r) => {
                    let ev = Event::default()
                        .event("roll")
                        .json_data(RollView::from(r))
                        .expect("record serializes");
                    return Some((Ok(ev), rx));
                }
                // a slow reader skips ahead; the HMI refetches on gaps
                Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}
