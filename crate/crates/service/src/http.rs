//! REST routes over [`StudyService`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use conseq_core::catalog::DomainId;
use conseq_core::recommender::NearMiss;
use conseq_core::stats::{AnalysisPlan, StatsError};
use conseq_core::study::{near_misses, Outcome, RatingInput, StepInput, StudyError};

use crate::service::{ServiceError, StudyService};

#[derive(Clone)]
struct AppState {
    service: Arc<StudyService>,
    admin_token: Option<Arc<str>>,
    default_alpha: f64,
}

/// Builds the router. `admin_token`, when set, guards `/export` and `/analysis`.
pub fn router(service: Arc<StudyService>, admin_token: Option<String>, default_alpha: f64) -> Router {
    let state = AppState { service, admin_token: admin_token.map(Arc::from), default_alpha };
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/demographics", post(demographics))
        .route("/sessions/{id}/preferences", post(preferences))
        .route("/sessions/{id}/presentation", get(presentation))
        .route("/sessions/{id}/ratings", post(ratings))
        .route("/export", get(export))
        .route("/analysis", get(analysis))
        .with_state(state)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near_misses: Option<Vec<NearMiss>>,
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownDomain(_) | ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Unauthorized => StatusCode::UNAUTHORIZED,
            ServiceError::Study(StudyError::OutOfOrder { .. }) => StatusCode::CONFLICT,
            ServiceError::Study(StudyError::InvalidPayload(_) | StudyError::NoCandidate(_)) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ServiceError::Analysis(StatsError::InvalidAlpha(_) | StatsError::UnknownGroupKey(_)) => {
                StatusCode::BAD_REQUEST
            }
            ServiceError::Analysis(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Study(StudyError::Explain(_)) | ServiceError::Log(_) | ServiceError::Io(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        }
    }

    /// Stable machine-readable error name.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownDomain(_) => "unknown_domain",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Unauthorized => "unauthorized",
            ServiceError::Study(StudyError::OutOfOrder { .. }) => "out_of_order",
            ServiceError::Study(StudyError::InvalidPayload(_)) => "invalid_payload",
            ServiceError::Study(StudyError::NoCandidate(_)) => "no_candidate",
            ServiceError::Study(StudyError::Explain(_)) => "explanation_failed",
            ServiceError::Analysis(StatsError::InsufficientGroups { .. }) => "insufficient_groups",
            ServiceError::Analysis(_) => "analysis_failed",
            ServiceError::Log(_) | ServiceError::Io(_) => "storage",
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        let near = match &self {
            ServiceError::Study(e) => near_misses(e).map(<[NearMiss]>::to_vec),
            _ => None,
        };
        let body = ErrorBody { error: self.code().to_string(), message: self.to_string(), near_misses: near };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ServiceError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

fn authorize(state: &AppState, headers: &HeaderMap) -> ApiResult<()> {
    let Some(token) = &state.admin_token else { return Ok(()) };
    let given = headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()).and_then(|v| v.strip_prefix("Bearer "));
    if given == Some(token.as_ref()) {
        Ok(())
    } else {
        Err(ServiceError::Unauthorized)
    }
}

#[derive(Deserialize)]
struct CreateRequest {
    domain: String,
}

async fn create_session(State(st): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: CreateRequest = parse_body(&body)?;
    let view = st.service.create_session(&req.domain).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn demographics(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let input = StepInput::Demographics(parse_body(&body)?);
    Ok(Json(st.service.submit_step(&id, input).await?))
}

async fn preferences(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let input = StepInput::Preferences(parse_body(&body)?);
    Ok(Json(st.service.submit_step(&id, input).await?))
}

async fn presentation(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(st.service.presentation(&id).await?))
}

async fn ratings(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let rating: RatingInput = parse_body(&body)?;
    Ok(Json(st.service.submit_step(&id, StepInput::Rating(rating)).await?))
}

#[derive(Deserialize)]
struct ExportQuery {
    domain: Option<String>,
    session: Option<String>,
}

async fn export(State(st): State<AppState>, headers: HeaderMap, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    authorize(&st, &headers)?;
    let domain: Option<DomainId> = q.domain.filter(|d| !d.is_empty()).map(|d| d.parse()).transpose()?;
    let session = q.session.filter(|s| !s.is_empty());
    let body = st.service.export_jsonl(domain, session.as_deref());
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

#[derive(Deserialize)]
struct AnalysisQuery {
    outcome: Option<String>,
    group_by: Option<String>,
    alpha: Option<f64>,
}

async fn analysis(State(st): State<AppState>, headers: HeaderMap, Query(q): Query<AnalysisQuery>) -> ApiResult<Response> {
    authorize(&st, &headers)?;
    let outcome: Outcome = q
        .outcome
        .ok_or_else(|| ServiceError::BadRequest("`outcome` is required".into()))?
        .parse()
        .map_err(|e| ServiceError::BadRequest(format!("{e}")))?;
    let keys: Vec<&str> = match &q.group_by {
        Some(g) if !g.trim().is_empty() => g.split(',').map(str::trim).collect(),
        _ => vec!["variant"],
    };
    let mut plan = AnalysisPlan::new(outcome, &keys);
    plan.alpha = q.alpha.unwrap_or(st.default_alpha);
    let report = st.service.analysis(&plan).await?;
    Ok(Json(json!(report)).into_response())
}
