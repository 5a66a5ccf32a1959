//! HTTP facade over sessions, the lexicon and the ontology.
//!
//! Endpoints (all JSON):
//!
//! | method | path                                  | body / query        |
//! |--------|---------------------------------------|---------------------|
//! | POST   | `/api/sessions`                       |                     |
//! | POST   | `/api/sessions/{id}/messages`         | `{"text"}`          |
//! | POST   | `/api/sessions/{id}/selections`       | `{"word","entity"}` |
//! | GET    | `/api/sessions/{id}/posterior?word=w` |                     |
//! | GET    | `/api/sessions/{id}/events`           |                     |
//! | GET    | `/api/lexicon`                        |                     |
//! | GET    | `/api/ontology`                       |                     |
//!
//! Errors are `{"error": code, "detail": message}`. Requests against one
//! session are processed one at a time in arrival order.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{Mutex, RwLock};
use tower_http::cors::CorsLayer;

use crate::elicitation::{Decision, ElicitationConfig, Strategy};
use crate::error::{ConfigError, SessionError};
use crate::inference::PosteriorReport;
use crate::ontology::Ontology;
use crate::session::{BotReply, Lexicon, LexiconStore, Session, SessionContext};

pub const DEFAULT_BODY_LIMIT: usize = 64 * 1024;

fn default_host() -> String {
    "127.0.0.1".into()
}

fn default_body_limit() -> usize {
    DEFAULT_BODY_LIMIT
}

/// Service configuration, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_host")]
    pub host: String,
    pub port: u16,
    pub ontology: PathBuf,
    pub lexicon: PathBuf,
    pub log_dir: PathBuf,
    #[serde(default = "default_body_limit")]
    pub body_limit: usize,
    /// Allowed browser origin for the chat UI, if any.
    #[serde(default)]
    pub cors_origin: Option<String>,
    #[serde(default)]
    pub stopwords: Option<Vec<String>>,
    #[serde(default = "defaults::k")]
    pub k: usize,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default = "defaults::threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn k() -> usize {
        3
    }
    pub fn threshold() -> f64 {
        0.9
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn elicitation(&self) -> ElicitationConfig {
        ElicitationConfig {
            k: self.k,
            strategy: self.strategy,
            threshold: self.threshold,
            seed: self.seed,
        }
    }
}

/// Shared service state.
pub struct AppState {
    ctx: Arc<SessionContext>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    log_dir: PathBuf,
    body_limit: usize,
}

impl AppState {
    /// Builds state from explicit parts, restoring any session logs found in
    /// `log_dir`.
    pub fn new(ctx: Arc<SessionContext>, log_dir: impl Into<PathBuf>, body_limit: usize) -> std::io::Result<Self> {
        let log_dir = log_dir.into();
        std::fs::create_dir_all(&log_dir)?;
        let sessions = restore_sessions(&ctx, &log_dir)?;
        Ok(AppState {
            ctx,
            sessions: RwLock::new(sessions),
            log_dir,
            body_limit,
        })
    }

    /// Validates `config` and loads everything it points at.
    pub fn from_config(config: &ServiceConfig) -> anyhow::Result<Self> {
        if config.port == 0 {
            return Err(ConfigError::Invalid("port must be in 1..=65535".into()).into());
        }
        let ontology = Arc::new(Ontology::load(&config.ontology)?);
        let elicitation = config.elicitation();
        elicitation.validate(&ontology)?;
        let lexicon = Arc::new(LexiconStore::open(&config.lexicon)?);
        // Touch the lexicon once so an unwritable path fails at startup.
        lexicon.snapshot().save(&config.lexicon)?;
        let mut ctx = SessionContext::new(ontology, elicitation, lexicon);
        if let Some(stop) = &config.stopwords {
            ctx = ctx.with_stopwords(stop);
        }
        Ok(AppState::new(Arc::new(ctx), &config.log_dir, config.body_limit)?)
    }

    pub fn context(&self) -> &Arc<SessionContext> {
        &self.ctx
    }

    pub async fn session_count(&self) -> usize {
        self.sessions.read().await.len()
    }

    async fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session `{id}`")))
    }
}

fn restore_sessions(
    ctx: &Arc<SessionContext>,
    log_dir: &Path,
) -> std::io::Result<HashMap<String, Arc<Mutex<Session>>>> {
    let mut out = HashMap::new();
    for entry in std::fs::read_dir(log_dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
            continue;
        }
        let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else {
            continue;
        };
        match Session::restore(id.clone(), Arc::clone(ctx), &path) {
            Ok(session) => {
                // Commits logged before a crash may be missing from the
                // lexicon file.
                for (word, entry) in session.state().lexicon.iter() {
                    if !ctx.lexicon.contains(word) {
                        ctx.lexicon.commit(word, entry.clone())?;
                    }
                }
                out.insert(id, Arc::new(Mutex::new(session)));
            }
            Err(e) => tracing::warn!("skipping session log {}: {e}", path.display()),
        }
    }
    Ok(out)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            detail: detail.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({"error": self.code, "detail": self.detail})),
        )
            .into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::NoActiveEpisode(_)
            | SessionError::CandidateNotOffered { .. }
            | SessionError::SessionClosed => StatusCode::CONFLICT,
            SessionError::UnknownEntity(_) | SessionError::Inference(_) => StatusCode::BAD_REQUEST,
            SessionError::Storage(_) => StatusCode::SERVICE_UNAVAILABLE,
            SessionError::CorruptLog(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

fn parse_body<T: DeserializeOwned>(body: Result<Bytes, BytesRejection>, limit: usize) -> Result<T, ApiError> {
    let bytes = body.map_err(|e| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::new(StatusCode::BAD_REQUEST, "body_too_large", format!("request body exceeds {limit} bytes"))
        } else {
            ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text())
        }
    })?;
    if bytes.len() > limit {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "body_too_large",
            format!("request body exceeds {limit} bytes"),
        ));
    }
    serde_json::from_slice(&bytes).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))
}

#[derive(Deserialize)]
struct MessageBody {
    text: String,
}

#[derive(Deserialize)]
struct SelectionBody {
    word: String,
    entity: String,
}

#[derive(Deserialize)]
struct PosteriorQuery {
    word: Option<String>,
}

/// Response body for `POST .../selections`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResponse {
    pub posterior: PosteriorReport,
    pub status: SelectionStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub committed_node: Option<String>,
    /// Follow-up prompt, present whenever the bot is waiting for another
    /// selection.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub next: Option<BotReply>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionStatus {
    Learning,
    Committed,
}

async fn create_session(State(app): State<Arc<AppState>>) -> Result<impl IntoResponse, ApiError> {
    let id = uuid::Uuid::new_v4().simple().to_string();
    let path = app.log_dir.join(format!("{id}.jsonl"));
    let session = Session::create_logged(id.clone(), Arc::clone(&app.ctx), path).map_err(|e| {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "storage_unavailable", e.to_string())
    })?;
    app.sessions
        .write()
        .await
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

async fn post_message(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<BotReply>, ApiError> {
    let session = app.session(&id).await?;
    let body: MessageBody = parse_body(body, app.body_limit)?;
    if body.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty_text", "message text is empty"));
    }
    let mut guard = session.lock().await;
    Ok(Json(guard.handle_message(&body.text)?))
}

async fn post_selection(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<SelectionResponse>, ApiError> {
    let session = app.session(&id).await?;
    let body: SelectionBody = parse_body(body, app.body_limit)?;
    let mut guard = session.lock().await;
    let result = guard.handle_selection(&body.word, &body.entity)?;
    let (status, committed_node) = match &result.decision {
        Decision::Commit { node, .. } => (SelectionStatus::Committed, Some(node.clone())),
        Decision::KeepLearning => (SelectionStatus::Learning, None),
    };
    Ok(Json(SelectionResponse {
        posterior: result.report(),
        status,
        committed_node,
        next: result.next,
    }))
}

async fn get_posterior(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<PosteriorQuery>,
) -> Result<Json<PosteriorReport>, ApiError> {
    let session = app.session(&id).await?;
    let word = q
        .word
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", "missing `word` parameter"))?;
    let guard = session.lock().await;
    guard
        .posterior(&word)
        .map(|p| Json(p.report()))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_word", format!("no episode for `{word}`")))
}

async fn get_events(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<impl IntoResponse, ApiError> {
    let session = app.session(&id).await?;
    let guard = session.lock().await;
    Ok(Json(guard.events().to_vec()))
}

async fn get_lexicon(State(app): State<Arc<AppState>>) -> Json<Lexicon> {
    Json(app.ctx.lexicon.snapshot())
}

async fn get_ontology(State(app): State<Arc<AppState>>) -> impl IntoResponse {
    Json(app.ctx.ontology.document().clone())
}

/// Builds the router. `cors_origin` enables CORS for one browser origin.
pub fn router(app: Arc<AppState>, cors_origin: Option<&str>) -> Router {
    let limit = app.body_limit;
    let mut r = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route("/api/sessions/{id}/selections", post(post_selection))
        .route("/api/sessions/{id}/posterior", get(get_posterior))
        .route("/api/sessions/{id}/events", get(get_events))
        .route("/api/lexicon", get(get_lexicon))
        .route("/api/ontology", get(get_ontology))
        // One extra byte so oversize bodies reach the handler's own check.
        .layer(DefaultBodyLimit::max(limit + 1))
        .with_state(app);
    if let Some(origin) = cors_origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        r = r.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    r
}

/// Runs the service until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let app = Arc::new(AppState::from_config(&config)?);
    let addr: SocketAddr = format!("{}:{}", config.host, config.port)
        .parse()
        .map_err(|e| ConfigError::Invalid(format!("bad listen address: {e}")))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(app, config.cors_origin.as_deref()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
