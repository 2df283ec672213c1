//! HTTP+JSON surface of the homeview dashboard.
//!
//! Handlers are thin delegations to `homeview-core`; each payload is the
//! serialized result of the matching in-process call. Timestamps use
//! RFC 3339 in UTC with a `Z` suffix. Calls that may reach the model run on
//! the blocking pool.

mod error;

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use chrono::{NaiveDate, Utc};
use homeview_core::analytics::{
    assessment_overview, biometric_aggregate, completion_trend, mood_delta_series, reading_overview, DateWindow,
};
use homeview_core::batch::persisted_anchors;
use homeview_core::chat::{explain_routing, ChatEngine};
use homeview_core::dashboard::{
    apply_selection, load_config, load_layout, recommend_widgets, save_config, save_layout, DisplayMode,
    DisplayState, OnboardingConfig,
};
use homeview_core::gateway::Gateway;
use homeview_core::provenance::{audit_anchors, resolve, AnchoredText, ProvenanceAnchor};
use homeview_core::record::{
    Entry, EntryFilter, HomeworkType, KindSelector, Message, MessageDirection, TherapyGoal,
};
use homeview_core::summary::SummaryEngine;
use homeview_core::RecordStore;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use error::{ApiError, ErrorBody};
use error::PendingError;

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<RecordStore>,
    pub gateway: Arc<Gateway>,
    pub summaries: Arc<SummaryEngine>,
    pub chat: Arc<ChatEngine>,
    auth_token: Option<String>,
    as_of: Option<NaiveDate>,
}

impl AppState {
    pub fn new(store: Arc<RecordStore>, gateway: Arc<Gateway>) -> Self {
        Self::build(store, gateway, None, None)
    }

    /// Pins "today" for windowing; used by tests and offline replays.
    pub fn with_as_of(self, as_of: NaiveDate) -> Self {
        Self::build(self.store, self.gateway, self.auth_token, Some(as_of))
    }

    /// Requires `Authorization: Bearer <token>` on every route.
    pub fn with_auth_token(mut self, token: Option<String>) -> Self {
        self.auth_token = token.filter(|t| !t.is_empty());
        self
    }

    fn build(store: Arc<RecordStore>, gateway: Arc<Gateway>, auth_token: Option<String>, as_of: Option<NaiveDate>) -> Self {
        let mut summaries = SummaryEngine::new(store.clone(), gateway.clone());
        let mut chat = ChatEngine::new(store.clone(), gateway.clone());
        if let Some(d) = as_of {
            summaries = summaries.with_as_of(d);
            chat = chat.with_as_of(d);
        }
        Self { store, gateway, summaries: Arc::new(summaries), chat: Arc::new(chat), auth_token, as_of }
    }

    pub fn today(&self) -> NaiveDate {
        self.as_of.unwrap_or_else(|| Utc::now().date_naive())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/clients", get(list_clients))
        .route("/clients/{id}/entries", get(list_entries).post(ingest_entry))
        .route("/clients/{id}/analytics/{kind}", get(analytics))
        .route("/clients/{id}/summary", post(generate_summary).get(latest_summary))
        .route("/clients/{id}/chat", post(chat))
        .route("/clients/{id}/chat/routing", get(routing))
        .route("/anchors/{record}/{entry}", get(resolve_anchor))
        .route("/audit", post(audit))
        .route("/therapist/config", get(get_config).put(put_config))
        .route("/widgets/recommend", get(recommend))
        .route("/clients/{id}/layout", get(get_layout).put(put_layout))
        .route("/clients/{id}/display-mode", put(put_display_mode))
        .route("/clients/{id}/messages", get(list_messages).post(post_message))
        .route("/clients/{id}/goals", get(get_goals).put(put_goals))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "no_route", "no such endpoint") })
        .layer(middleware::from_fn_with_state(state.clone(), require_auth))
        .layer(middleware::from_fn(attach_request_path))
        .with_state(state)
}

async fn attach_request_path(request: Request, next: Next) -> Response {
    let path = request.uri().path().to_string();
    let response = next.run(request).await;
    match response.extensions().get::<PendingError>() {
        Some(PendingError(err)) => (err.status, Json(err.body(&path))).into_response(),
        None => response,
    }
}

async fn require_auth(State(state): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.auth_token {
        let presented = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response();
        }
    }
    next.run(request).await
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::bad_request("invalid_body", e.into_inner().to_string()).at(path)
    })
}

fn parse_query<T: DeserializeOwned>(query: Result<Query<T>, axum::extract::rejection::QueryRejection>) -> Result<T, ApiError> {
    query.map(|Query(q)| q).map_err(|e| ApiError::bad_request("invalid_query", e.body_text()))
}

type RawQuery<T> = Result<Query<T>, axum::extract::rejection::QueryRejection>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map(Json)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientSummary {
    pub record_id: String,
    pub client_label: String,
    pub entry_count: usize,
}

async fn list_clients(State(state): State<AppState>) -> ApiResult<Vec<ClientSummary>> {
    let mut out = Vec::new();
    for id in state.store.record_ids() {
        let record = state.store.snapshot(&id)?;
        out.push(ClientSummary {
            record_id: id,
            client_label: record.client_label.clone(),
            entry_count: record.entry_count(),
        });
    }
    Ok(Json(out))
}

#[derive(Debug, Default, Deserialize)]
pub struct EntriesQuery {
    /// Comma-separated entry kinds or homework types.
    pub kinds: Option<String>,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
}

fn entry_filter(q: &EntriesQuery) -> Result<EntryFilter, ApiError> {
    let kinds = match &q.kinds {
        None => None,
        Some(list) => Some(
            list.split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<KindSelector>().map_err(|e| ApiError::bad_request("invalid_query", e).at("kinds")))
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };
    Ok(EntryFilter { kinds, from: q.from, to: q.to })
}

async fn list_entries(State(state): State<AppState>, Path(id): Path<String>, q: RawQuery<EntriesQuery>) -> ApiResult<Vec<Entry>> {
    let filter = entry_filter(&parse_query(q)?)?;
    Ok(Json(state.store.list_entries(&id, &filter)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Created {
    pub entry_id: String,
}

async fn ingest_entry(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let entry: Entry = parse_body(&body)?;
    let entry_id = state.store.ingest_entry(&id, entry)?;
    Ok((StatusCode::CREATED, Json(Created { entry_id })))
}

#[derive(Debug, Default, Deserialize)]
pub struct WindowQuery {
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    /// Comma-separated homework types, `mood` only.
    pub types: Option<String>,
}

/// Missing bounds default to the record's covering window, then to today.
pub fn resolve_window(covering: Option<DateWindow>, today: NaiveDate, from: Option<NaiveDate>, to: Option<NaiveDate>) -> Result<DateWindow, ApiError> {
    let fallback = covering.unwrap_or(DateWindow::single(today));
    let end = to.unwrap_or(fallback.end);
    let start = from.unwrap_or(fallback.start.min(end));
    Ok(DateWindow::new(start, end)?)
}

async fn analytics(
    State(state): State<AppState>,
    Path((id, kind)): Path<(String, String)>,
    q: RawQuery<WindowQuery>,
) -> Result<Response, ApiError> {
    let q = parse_query(q)?;
    let record = state.store.snapshot(&id)?;
    let window = resolve_window(DateWindow::covering(&record), state.today(), q.from, q.to)?;
    let body = match kind.as_str() {
        "completion" => serde_json::to_value(completion_trend(&record, window)),
        "mood" => {
            let types = match &q.types {
                None => None,
                Some(list) => Some(
                    list.split(',')
                        .map(|s| s.trim().parse::<HomeworkType>().map_err(|e| ApiError::bad_request("invalid_query", e).at("types")))
                        .collect::<Result<Vec<_>, _>>()?,
                ),
            };
            serde_json::to_value(mood_delta_series(&record, window, types.as_deref()))
        }
        "biometrics" => serde_json::to_value(biometric_aggregate(&record, window)),
        "assessments" => serde_json::to_value(assessment_overview(&record, window)?),
        "reading" => serde_json::to_value(reading_overview(&record)),
        other => return Err(ApiError::new(StatusCode::NOT_FOUND, "unknown_analytics", format!("no analytics view `{other}`"))),
    }
    .expect("analytics payloads serialize");
    Ok(Json(body).into_response())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryActivation {
    pub activate: bool,
}

async fn generate_summary(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let signal: SummaryActivation = parse_body(&body)?;
    if !signal.activate {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "not_activated", "summary generation needs `activate: true`").at("activate"));
    }
    let out = blocking(move || {
        let config = load_config(&state.store)?;
        Ok(state.summaries.generate_summary(&id, &config)?)
    })
    .await?;
    Ok(out.into_response())
}

async fn latest_summary(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    state.store.snapshot(&id)?;
    match state.summaries.latest(&id)? {
        Some(s) => Ok(Json(s).into_response()),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "no_summary", format!("no summary generated for `{id}`"))),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatQuestion {
    pub question: String,
}

async fn chat(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let ChatQuestion { question } = parse_body(&body)?;
    let out = blocking(move || {
        let config = load_config(&state.store)?;
        Ok(state.chat.answer(&id, &question, &config)?)
    })
    .await?;
    Ok(out.into_response())
}

#[derive(Debug, Deserialize)]
pub struct RoutingQuery {
    pub q: String,
}

async fn routing(State(state): State<AppState>, Path(id): Path<String>, q: RawQuery<RoutingQuery>) -> Result<Response, ApiError> {
    let q = parse_query(q)?;
    state.store.snapshot(&id)?;
    Ok(Json(explain_routing(&q.q)).into_response())
}

#[derive(Debug, Deserialize)]
pub struct AnchorQuery {
    /// Hash recorded in the anchor; without it staleness is not judged.
    pub excerpt_hash: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorResolution {
    pub anchor: ProvenanceAnchor,
    pub entry: homeview_core::provenance::ResolvedEntry,
    pub stale: bool,
}

async fn resolve_anchor(
    State(state): State<AppState>,
    Path((record_id, entry_id)): Path<(String, String)>,
    q: RawQuery<AnchorQuery>,
) -> Result<Response, ApiError> {
    let q = parse_query(q)?;
    let record = state.store.snapshot(&record_id)?;
    let current = record.find(&entry_id).ok_or_else(|| {
        ApiError::from(homeview_core::provenance::ProvenanceError::DanglingAnchor {
            record_id: record_id.clone(),
            entry_id: entry_id.clone(),
        })
    })?;
    let mut anchor = ProvenanceAnchor::for_entry(&record_id, &current);
    if let Some(hash) = q.excerpt_hash {
        anchor.excerpt_hash = hash;
    }
    let resolution = resolve(&anchor, &state.store)?;
    Ok(Json(AnchorResolution { anchor, entry: resolution.entry, stale: resolution.stale }).into_response())
}

/// Either a document carrying anchors, or a record id whose persisted
/// summary and answer are audited.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AuditRequest {
    Record { record_id: String },
    Document(AnchoredText),
}

async fn audit(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: AuditRequest = parse_body(&body)?;
    let anchors = match request {
        AuditRequest::Record { record_id } => {
            state.store.snapshot(&record_id)?;
            persisted_anchors(&state.store, &record_id)?
        }
        AuditRequest::Document(doc) => doc.anchors,
    };
    Ok(Json(audit_anchors(&anchors, &state.store)).into_response())
}

async fn get_config(State(state): State<AppState>) -> ApiResult<OnboardingConfig> {
    Ok(Json(load_config(&state.store)?))
}

async fn put_config(State(state): State<AppState>, body: Bytes) -> ApiResult<OnboardingConfig> {
    let config: OnboardingConfig = parse_body(&body)?;
    config.validate()?;
    save_config(&state.store, &config)?;
    Ok(Json(config))
}

async fn recommend(State(state): State<AppState>) -> Result<Response, ApiError> {
    let config = load_config(&state.store)?;
    Ok(Json(recommend_widgets(&config)).into_response())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutRequest {
    /// Chosen widget ids in display order.
    pub widgets: Vec<String>,
}

async fn get_layout(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    state.store.snapshot(&id)?;
    match load_layout(&state.store, &id)? {
        Some(layout) => Ok(Json(layout).into_response()),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "no_layout", format!("no layout saved for `{id}`"))),
    }
}

async fn put_layout(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let request: LayoutRequest = parse_body(&body)?;
    state.store.snapshot(&id)?;
    let config = load_config(&state.store)?;
    let layout = apply_selection(&recommend_widgets(&config), &request.widgets)?;
    save_layout(&state.store, &id, &layout)?;
    Ok(Json(layout).into_response())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisplayModeRequest {
    pub mode: DisplayMode,
    #[serde(default)]
    pub overrides: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisplayModeResponse {
    pub layout: homeview_core::dashboard::DashboardLayout,
    pub visible: Vec<homeview_core::dashboard::WidgetInstance>,
}

async fn put_display_mode(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let request: DisplayModeRequest = parse_body(&body)?;
    state.store.snapshot(&id)?;
    let mut layout = load_layout(&state.store, &id)?
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no_layout", format!("no layout saved for `{id}`")))?;
    if let Some(unknown) = request.overrides.keys().find(|k| !layout.widgets.iter().any(|w| &w.widget_id == *k)) {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown_widget", format!("widget `{unknown}` is not in the layout")).at("overrides"));
    }
    layout.display = DisplayState { mode: request.mode, overrides: request.overrides };
    save_layout(&state.store, &id, &layout)?;
    let visible = layout.visible();
    Ok(Json(DisplayModeResponse { layout, visible }).into_response())
}

async fn list_messages(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Vec<Message>> {
    Ok(Json(state.store.snapshot(&id)?.messages.clone()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageRequest {
    pub text: String,
}

/// Messages are stored for display only; nothing is delivered.
async fn post_message(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let MessageRequest { text } = parse_body(&body)?;
    let message = Message { message_id: String::new(), sent_at: Utc::now(), direction: MessageDirection::ToClient, text };
    let entry_id = state.store.ingest_entry(&id, Entry::Message(message))?;
    Ok((StatusCode::CREATED, Json(Created { entry_id })))
}

async fn get_goals(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Vec<TherapyGoal>> {
    Ok(Json(state.store.snapshot(&id)?.goals.clone()))
}

async fn put_goals(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Vec<TherapyGoal>> {
    let goals: Vec<TherapyGoal> = parse_body(&body)?;
    Ok(Json(state.store.replace_goals(&id, goals)?))
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(state: AppState, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
