//! JSON over HTTP. Every error is an [`ErrorBody`] with a stable `code`.

use std::sync::Arc;

use axum::extract::rejection::QueryRejection;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use musicscaffold_core::interpret::{BackendKind, InterpretError};
use musicscaffold_core::library::{ListFilter, SessionDiff, SessionSummary};
use musicscaffold_core::midi::emit_midi;
use musicscaffold_core::render::RenderBackend;
use musicscaffold_core::{
    AttributeClass, AttributeId, AttributeSet, Provenance, RenderBackendKind, RenderResult, SessionEntry,
    SymbolicPrompt,
};

use crate::app::App;
use crate::error::{ApiError, ErrorBody};

/// `Json` with failures reported as [`ApiError`].
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(value)) => Ok(ApiJson(value)),
            Err(rejection) => Err(ApiError::new(rejection.status(), "InvalidRequest", rejection.body_text())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterpretRequest {
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterpretResponse {
    pub plan: AttributeSet,
    pub backend: BackendKind,
    pub fallback_used: bool,
    /// Why the external interpreter was abandoned.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SketchRequest {
    pub plan: AttributeSet,
    /// Prior session whose plan the submitted one is compared against.
    #[serde(default)]
    pub session_id: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SketchResponse {
    pub prompt: SymbolicPrompt,
    /// Standard MIDI File, base64.
    pub midi: String,
    pub provenance: Provenance,
    pub reflective_questions: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenderRequest {
    pub plan: AttributeSet,
    pub prompt: SymbolicPrompt,
    #[serde(default)]
    pub backend: Option<RenderBackendKind>,
}

/// A session to store. Missing ids and timestamps are filled in; sending a
/// stored session back with more sketches or results appends them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionDraft {
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(default)]
    pub created_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub intent_text: Option<String>,
    pub plan: AttributeSet,
    #[serde(default)]
    pub sketches: Vec<SymbolicPrompt>,
    #[serde(default)]
    pub results: Vec<RenderResult>,
    #[serde(default)]
    pub parent_session: Option<String>,
}

impl SessionDraft {
    pub fn into_entry(self) -> SessionEntry {
        let mut entry = SessionEntry::new(self.plan);
        if let Some(id) = self.session_id {
            entry.session_id = id;
        }
        if let Some(at) = self.created_at {
            entry.created_at = at;
        }
        if let Some(text) = self.intent_text {
            entry.intent_text = text;
        }
        entry.sketches = self.sketches;
        entry.results = self.results;
        entry.parent_session = self.parent_session;
        entry
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedSession {
    pub session_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleInfo {
    pub name: String,
    pub applies_to: AttributeId,
    pub class: AttributeClass,
    pub description: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub segments: usize,
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/schema", get(schema))
        .route("/rules", get(rules))
        .route("/interpret", post(interpret))
        .route("/sketch", post(sketch))
        .route("/render", post(render))
        .route("/sessions", post(save_session).get(list_sessions))
        .route("/sessions/{id}", get(load_session))
        .route("/sessions/{id}/diff/{other}", get(diff_sessions))
        .route("/sessions/{id}/export", get(export_session))
        .fallback(not_found)
        .with_state(app)
}

/// Runs library and CPU-bound work off the async workers.
async fn blocking<T: Send + 'static>(
    app: &Arc<App>,
    work: impl FnOnce(&App) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let app = app.clone();
    tokio::task::spawn_blocking(move || work(&app))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such endpoint")
}

async fn health(State(app): State<Arc<App>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        segments: app.corpus_len(),
    })
}

async fn schema() -> Response {
    ([(header::CONTENT_TYPE, "application/schema+json")], crate::SCHEMA).into_response()
}

pub fn rule_list(app: &App) -> Vec<RuleInfo> {
    app.refiner
        .rules()
        .iter()
        .map(|r| RuleInfo {
            name: r.name.to_string(),
            applies_to: r.applies_to,
            class: r.applies_to.class(),
            description: r.description.to_string(),
        })
        .collect()
}

async fn rules(State(app): State<Arc<App>>) -> Json<Vec<RuleInfo>> {
    Json(rule_list(&app))
}

async fn interpret(
    State(app): State<Arc<App>>,
    ApiJson(req): ApiJson<InterpretRequest>,
) -> Result<Response, ApiError> {
    let outcome = app
        .interpreter
        .interpret_with_fallback(&req.text, &app.settings.interpreter)
        .await?;
    // An unreachable backend is reported as 503 even though the lexicon
    // still produced a plan; a garbled reply is not.
    let status = match outcome.error {
        Some(InterpretError::BackendUnavailable(_)) => StatusCode::SERVICE_UNAVAILABLE,
        _ => StatusCode::OK,
    };
    let body = InterpretResponse {
        plan: outcome.plan,
        backend: outcome.backend,
        fallback_used: outcome.fallback_used,
        error: outcome.error.map(|e| ApiError::from(e).body),
    };
    Ok((status, Json(body)).into_response())
}

async fn sketch(
    State(app): State<Arc<App>>,
    ApiJson(req): ApiJson<SketchRequest>,
) -> Result<Json<SketchResponse>, ApiError> {
    let response = blocking(&app, move |app| {
        let prior = match &req.session_id {
            Some(id) => Some(app.library.load_session(id)?),
            None => None,
        };
        let prompt = app.sketch(&req.plan)?;
        let reflective_questions = prior
            .map(|p| app.interpreter.reflective_questions(&p.plan, &req.plan))
            .unwrap_or_default();
        Ok(SketchResponse {
            midi: base64::engine::general_purpose::STANDARD.encode(emit_midi(&prompt)),
            provenance: prompt.provenance().clone(),
            prompt,
            reflective_questions,
        })
    })
    .await?;
    Ok(Json(response))
}

async fn render(
    State(app): State<Arc<App>>,
    ApiJson(req): ApiJson<RenderRequest>,
) -> Result<Json<RenderResult>, ApiError> {
    let backend = match req.backend.unwrap_or(RenderBackendKind::LocalSynth) {
        RenderBackendKind::LocalSynth => RenderBackend::LocalSynth,
        RenderBackendKind::ExternalLmm => match &app.settings.lmm {
            Some(config) => RenderBackend::ExternalLmm(config.clone()),
            None => {
                return Err(ApiError::new(
                    StatusCode::SERVICE_UNAVAILABLE,
                    "BackendUnavailable",
                    "no external render service is configured",
                ))
            }
        },
    };
    Ok(Json(app.renderer.render(&req.prompt, &req.plan, &backend).await?))
}

async fn save_session(
    State(app): State<Arc<App>>,
    ApiJson(draft): ApiJson<SessionDraft>,
) -> Result<Response, ApiError> {
    let (session_id, existed) = blocking(&app, move |app| {
        let entry = draft.into_entry();
        let existed = app.library.contains(&entry.session_id)?;
        Ok((app.library.save_session(&entry)?, existed))
    })
    .await?;
    let status = if existed { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(SavedSession { session_id })).into_response())
}

async fn list_sessions(
    State(app): State<Arc<App>>,
    filter: Result<Query<ListFilter>, QueryRejection>,
) -> Result<Json<Vec<SessionSummary>>, ApiError> {
    let Query(filter) = filter.map_err(|e| ApiError::bad_request(e.body_text()))?;
    Ok(Json(blocking(&app, move |app| Ok(app.library.list_sessions(&filter)?)).await?))
}

async fn load_session(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
) -> Result<Json<SessionEntry>, ApiError> {
    Ok(Json(blocking(&app, move |app| Ok(app.library.load_session(&id)?)).await?))
}

async fn diff_sessions(
    State(app): State<Arc<App>>,
    Path((id, other)): Path<(String, String)>,
) -> Result<Json<SessionDiff>, ApiError> {
    Ok(Json(
        blocking(&app, move |app| Ok(app.library.diff_sessions(&id, &other)?)).await?,
    ))
}

async fn export_session(State(app): State<Arc<App>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let stem = if id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') { id.as_str() } else { "session" };
    let name = format!("attachment; filename=\"{stem}.zip\"");
    let bytes = blocking(&app, move |app| Ok(app.library.export_session(&id)?)).await?;
    Ok((
        [(header::CONTENT_TYPE, "application/zip".to_string()), (header::CONTENT_DISPOSITION, name)],
        bytes,
    )
        .into_response())
}
