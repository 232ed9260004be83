//! HTTP+JSON API.
//!
//! Authentication is a bearer token: either the configured admin token or
//! a worker token issued by `POST /v1/workers`. Errors are returned as
//! `{"error": {"code": ..., "message": ...}}`.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::app::{CampaignSpec, Service, ServiceError};
use crate::model::{export_tsv, stats_csv, Campaign, Id, Report, ReportStatus, Role};
use crate::store::{hash_token, StoreError};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    existing_report: Option<Id>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            existing_report: None,
        }
    }

    fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or unknown bearer token")
    }

    fn forbidden() -> Self {
        Self::new(StatusCode::FORBIDDEN, "forbidden", "not allowed for this token")
    }

    fn not_found(what: &str, id: Id) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("{what} {id} not found"))
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut err = json!({ "code": self.code, "message": self.message });
        if let Some(id) = self.existing_report {
            err["existing_report"] = json!(id);
        }
        (self.status, Json(json!({ "error": err }))).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::InvalidUrl(m) => ApiError::new(StatusCode::BAD_REQUEST, "invalid_url", m),
            ServiceError::InvalidCampaign(m) => ApiError::new(StatusCode::BAD_REQUEST, "invalid_campaign", m),
            ServiceError::Config(m) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", m),
            ServiceError::Store(e) => e.into(),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Duplicate { existing } => ApiError {
                existing_report: Some(existing),
                ..ApiError::new(StatusCode::CONFLICT, "duplicate_report", e.to_string())
            },
            StoreError::SameUrl => ApiError::new(StatusCode::BAD_REQUEST, "invalid_url", e.to_string()),
            StoreError::NotFound(..) => ApiError::new(StatusCode::NOT_FOUND, "not_found", e.to_string()),
            StoreError::BadTransition { .. } => ApiError::new(StatusCode::CONFLICT, "invalid_state", e.to_string()),
            _ => {
                tracing::error!(error = %e, "store failure");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "storage error")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Principal {
    Admin,
    Worker(Id),
}

fn principal(svc: &Service, headers: &HeaderMap) -> Result<Principal, ApiError> {
    let token = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim)
        .ok_or_else(ApiError::unauthorized)?;
    // Compare hashes so the comparison time does not depend on the token.
    if hash_token(token) == hash_token(&svc.config.admin_token) {
        return Ok(Principal::Admin);
    }
    match svc.store.worker_by_token(token) {
        Some(w) if w.role == Role::Admin => Ok(Principal::Admin),
        Some(w) => Ok(Principal::Worker(w.id)),
        None => Err(ApiError::unauthorized()),
    }
}

fn require_admin(svc: &Service, headers: &HeaderMap) -> Result<(), ApiError> {
    match principal(svc, headers)? {
        Principal::Admin => Ok(()),
        Principal::Worker(_) => Err(ApiError::forbidden()),
    }
}

fn campaign(svc: &Service, id: Id) -> Result<Campaign, ApiError> {
    svc.store.campaign(id).ok_or_else(|| ApiError::not_found("campaign", id))
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/v1/workers", post(create_worker))
        .route("/v1/workers/{id}/ledger", get(worker_ledger))
        .route("/v1/campaigns", post(create_campaign))
        .route("/v1/campaigns/{id}", get(get_campaign))
        .route("/v1/campaigns/{id}/examples", get(campaign_examples))
        .route("/v1/campaigns/{id}/reports", post(submit_report))
        .route("/v1/campaigns/{id}/stats", get(campaign_stats))
        .route("/v1/campaigns/{id}/export", get(export_corpus))
        .route("/v1/reports/{id}", get(get_report))
        .route("/v1/reports/{id}/reprocess", post(reprocess_report))
        .with_state(service)
}

type Svc = State<Arc<Service>>;

#[derive(Deserialize)]
struct NewWorker {
    name: String,
    #[serde(default)]
    admin: bool,
}

async fn create_worker(State(svc): Svc, headers: HeaderMap, Json(body): Json<NewWorker>) -> Result<Response, ApiError> {
    require_admin(&svc, &headers)?;
    if body.name.trim().is_empty() {
        return Err(ApiError::bad_request("name must not be empty"));
    }
    let role = if body.admin { Role::Admin } else { Role::Worker };
    let (worker, token) = svc.store.add_worker(body.name.trim(), role)?;
    let body = json!({ "id": worker.id, "name": worker.name, "role": worker.role, "token": token });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

fn campaign_view(c: &Campaign) -> Value {
    json!({
        "id": c.id,
        "domain": c.domain,
        "lang_e": c.lang_e,
        "lang_f": c.lang_f,
        "reward": c.reward,
        "align": c.align,
        "lm_order": c.lm_order,
        "dev_sentence_count": c.dev_sentences.len(),
        "created_at": c.created_at,
    })
}

async fn create_campaign(State(svc): Svc, headers: HeaderMap, Json(spec): Json<CampaignSpec>) -> Result<Response, ApiError> {
    require_admin(&svc, &headers)?;
    // Training the campaign models is CPU work.
    let svc2 = svc.clone();
    let c = tokio::task::spawn_blocking(move || svc2.create_campaign(spec))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok((StatusCode::CREATED, Json(campaign_view(&c))).into_response())
}

async fn get_campaign(State(svc): Svc, headers: HeaderMap, Path(id): Path<Id>) -> Result<Json<Value>, ApiError> {
    principal(&svc, &headers)?;
    Ok(Json(campaign_view(&campaign(&svc, id)?)))
}

#[derive(Deserialize)]
struct ExamplesQuery {
    n: Option<usize>,
}

async fn campaign_examples(
    State(svc): Svc,
    headers: HeaderMap,
    Path(id): Path<Id>,
    Query(q): Query<ExamplesQuery>,
) -> Result<Json<Value>, ApiError> {
    principal(&svc, &headers)?;
    let c = campaign(&svc, id)?;
    let n = q.n.unwrap_or(10).min(100);
    let examples: Vec<&String> = c.dev_sentences.iter().take(n).collect();
    Ok(Json(json!({ "campaign_id": id, "examples": examples })))
}

#[derive(Deserialize)]
struct NewReport {
    url_a: String,
    url_b: String,
}

async fn submit_report(
    State(svc): Svc,
    headers: HeaderMap,
    Path(id): Path<Id>,
    Json(body): Json<NewReport>,
) -> Result<Response, ApiError> {
    let Principal::Worker(worker_id) = principal(&svc, &headers)? else {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "forbidden", "reports are submitted by workers"));
    };
    campaign(&svc, id)?;
    let r = svc.submit_report(id, worker_id, &body.url_a, &body.url_b).await?;
    Ok((StatusCode::ACCEPTED, Json(report_view(&svc, &r))).into_response())
}

#[derive(Serialize)]
struct PairView<'a> {
    src: &'a str,
    tgt: &'a str,
    cost: f64,
    s_a: f64,
    s_d: f64,
    h_in: f64,
    h_gen: f64,
}

fn report_view(svc: &Service, r: &Report) -> Value {
    let mut v = json!({
        "id": r.id,
        "campaign_id": r.campaign_id,
        "worker_id": r.worker_id,
        "url_a": r.url_a,
        "url_b": r.url_b,
        "status": r.status,
        "submitted_at": r.submitted_at,
    });
    match r.status {
        ReportStatus::Pending | ReportStatus::Processing => {}
        ReportStatus::Failed => {
            v["completed_at"] = json!(r.completed_at);
            v["failure"] = json!(r.failure);
        }
        ReportStatus::Done => {
            let pairs = svc.store.pairs(r.id);
            let views: Vec<PairView> = pairs
                .iter()
                .map(|p| PairView {
                    src: &p.src,
                    tgt: &p.tgt,
                    cost: p.cost,
                    s_a: p.s_a,
                    s_d: p.s_d,
                    h_in: p.h_in,
                    h_gen: p.h_gen,
                })
                .collect();
            v["completed_at"] = json!(r.completed_at);
            v["pair_count"] = json!(r.pair_count);
            v["swapped"] = json!(r.swapped);
            if let Some(reward) = &r.reward {
                v["reward"] = json!({
                    "mode": reward.mode,
                    "amount": reward.amount,
                    "raw": reward.raw,
                    "sum_terms": reward.sum_terms,
                });
            }
            v["pairs"] = json!(views);
        }
    }
    v
}

async fn get_report(State(svc): Svc, headers: HeaderMap, Path(id): Path<Id>) -> Result<Json<Value>, ApiError> {
    let who = principal(&svc, &headers)?;
    let r = svc.store.report(id).ok_or_else(|| ApiError::not_found("report", id))?;
    if who != Principal::Admin && who != Principal::Worker(r.worker_id) {
        return Err(ApiError::forbidden());
    }
    Ok(Json(report_view(&svc, &r)))
}

async fn reprocess_report(State(svc): Svc, headers: HeaderMap, Path(id): Path<Id>) -> Result<Json<Value>, ApiError> {
    require_admin(&svc, &headers)?;
    let changed = svc.reprocess_report(id).await?;
    Ok(Json(json!({ "id": id, "pairs_changed": changed })))
}

#[derive(Deserialize)]
struct StatsQuery {
    format: Option<String>,
}

async fn campaign_stats(
    State(svc): Svc,
    headers: HeaderMap,
    Path(id): Path<Id>,
    Query(q): Query<StatsQuery>,
) -> Result<Response, ApiError> {
    require_admin(&svc, &headers)?;
    campaign(&svc, id)?;
    let points = svc.store.stats(id);
    match q.format.as_deref() {
        Some("csv") => Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], stats_csv(&points)).into_response()),
        None | Some("json") => Ok(Json(json!({ "campaign_id": id, "points": points })).into_response()),
        Some(other) => Err(ApiError::bad_request(format!("unknown format {other:?}"))),
    }
}

#[derive(Deserialize)]
struct ExportQuery {
    max_cost: Option<f64>,
}

async fn export_corpus(
    State(svc): Svc,
    headers: HeaderMap,
    Path(id): Path<Id>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    require_admin(&svc, &headers)?;
    let c = campaign(&svc, id)?;
    let max_cost = q.max_cost.unwrap_or(c.align.cost_threshold);
    if !max_cost.is_finite() {
        return Err(ApiError::bad_request("max_cost must be finite"));
    }
    let body = export_tsv(&svc.store.export(id, max_cost));
    Ok(([(header::CONTENT_TYPE, "text/tab-separated-values; charset=utf-8")], body).into_response())
}

async fn worker_ledger(State(svc): Svc, headers: HeaderMap, Path(id): Path<Id>) -> Result<Json<Value>, ApiError> {
    let who = principal(&svc, &headers)?;
    if who != Principal::Admin && who != Principal::Worker(id) {
        return Err(ApiError::forbidden());
    }
    svc.store.worker(id).ok_or_else(|| ApiError::not_found("worker", id))?;
    let entries = svc.store.ledger_for_worker(id);
    let total: u64 = entries.iter().map(|e| e.amount).sum();
    Ok(Json(json!({ "worker_id": id, "entries": entries, "total": total })))
}

/// Serves the API until the listener fails.
pub async fn serve(service: Arc<Service>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}
