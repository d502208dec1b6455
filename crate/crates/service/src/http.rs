//! JSON API over [`SessionManager`] plus the review page at `/`.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::apply::ApplyDestination;
use crate::manager::{CreateSession, SessionManager};
use crate::report::Report;
use crate::session::{BulkAction, Liked, ResetTarget, Session, SessionError};

const INDEX_HTML: &str = include_str!("index.html");

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "bad_request",
            message: message.into(),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::UnknownSession(_) | SessionError::UnknownTest(_) => StatusCode::NOT_FOUND,
            SessionError::WrongPhase(_) => StatusCode::CONFLICT,
            SessionError::NoPriorRun
            | SessionError::UnknownVersion(_)
            | SessionError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
            SessionError::Llm(_) => StatusCode::BAD_GATEWAY,
            SessionError::Apply(_) | SessionError::Project(_) => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError {
            status,
            code: e.code(),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({"error": {"code": self.code, "message": self.message}})),
        )
            .into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;
type Manager = Arc<SessionManager>;

/// Parses a JSON body; an empty body reads as `{}`.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    let bytes: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) {
        b"{}"
    } else {
        bytes
    };
    serde_json::from_slice(bytes)
        .map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

/// Runs blocking session work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, SessionError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "internal",
            message: e.to_string(),
        })?
        .map_err(ApiError::from)
}

fn to_value(v: impl serde::Serialize) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn status_view(s: &Session) -> Value {
    let (error, failure) = match s.error() {
        Some((kind, message)) => (Some(message.to_string()), Some(kind)),
        None => (None, None),
    };
    json!({
        "id": s.id,
        "uut": s.uut,
        "technique": s.technique,
        "phase": s.phase.name(),
        "progress": s.progress,
        "error": error,
        "failure": failure,
        "summary": s.summary,
        "tests_count": s.tests.len(),
    })
}

pub fn router(manager: Manager) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/api/sessions", get(list_sessions).post(create_session))
        .route("/api/sessions/{id}", get(session_status))
        .route("/api/sessions/{id}/report", get(report))
        .route("/api/sessions/{id}/tests", get(tests))
        .route(
            "/api/sessions/{id}/tests/{tid}",
            axum::routing::delete(delete_test),
        )
        .route("/api/sessions/{id}/tests/{tid}/run", post(run_test))
        .route("/api/sessions/{id}/tests/{tid}/reset", post(reset_test))
        .route("/api/sessions/{id}/tests/{tid}/feedback", post(feedback))
        .route("/api/sessions/{id}/tests/{tid}/flags", post(flags))
        .route("/api/sessions/{id}/tests/{tid}/versions", get(versions))
        .route(
            "/api/sessions/{id}/tests/{tid}/versions/active",
            post(set_active),
        )
        .route("/api/sessions/{id}/bulk", post(bulk))
        .route("/api/sessions/{id}/coverage", get(coverage))
        .route("/api/sessions/{id}/lines", get(lines))
        .route("/api/sessions/{id}/apply", post(apply))
        .fallback(not_found)
        .with_state(manager)
}

async fn index() -> impl IntoResponse {
    ([(header::CACHE_CONTROL, "no-store")], Html(INDEX_HTML))
}

async fn not_found() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        code: "not_found",
        message: "no such endpoint".to_string(),
    }
}

async fn list_sessions(State(m): State<Manager>) -> ApiResult {
    blocking(move || {
        let mut out = Vec::new();
        for id in m.ids() {
            out.push(m.read_session(&id, |s| Ok(status_view(s)))?);
        }
        Ok(Json(Value::Array(out)))
    })
    .await
}

async fn create_session(State(m): State<Manager>, bytes: Bytes) -> Result<Response, ApiError> {
    let request: CreateSession = body(&bytes)?;
    let id = blocking(move || m.create(request)).await?;
    Ok((StatusCode::CREATED, Json(json!({"id": id}))).into_response())
}

async fn session_status(State(m): State<Manager>, Path(id): Path<String>) -> ApiResult {
    blocking(move || m.read_session(&id, |s| Ok(Json(status_view(s))))).await
}

async fn report(State(m): State<Manager>, Path(id): Path<String>) -> ApiResult {
    blocking(move || {
        m.read_session(&id, |s| {
            Report::from_session(s)
                .map(|r| Json(to_value(r)))
                .ok_or(SessionError::WrongPhase(s.phase.name()))
        })
    })
    .await
}

async fn tests(State(m): State<Manager>, Path(id): Path<String>) -> ApiResult {
    blocking(move || {
        m.read_session(&id, |s| {
            if !s.is_ready() {
                return Err(SessionError::WrongPhase(s.phase.name()));
            }
            let passed = s
                .tests
                .iter()
                .filter(|t| t.status == crate::session::EntryStatus::Passing)
                .count();
            Ok(Json(json!({
                "tests": s.tests,
                "passed": passed,
                "selected": s.selected_ids().len(),
            })))
        })
    })
    .await
}

#[derive(Deserialize)]
struct RunBody {
    code: Option<String>,
}

async fn run_test(
    State(m): State<Manager>,
    Path((id, tid)): Path<(String, String)>,
    bytes: Bytes,
) -> ApiResult {
    let b: RunBody = body(&bytes)?;
    blocking(move || {
        m.with_session(&id, |s, t| {
            let (entry, row) = s.run_test(t, &tid, b.code)?;
            Ok(Json(
                json!({"test": entry, "coverage": row, "totals": s.totals(None)?}),
            ))
        })
    })
    .await
}

#[derive(Deserialize)]
struct ResetBody {
    to: ResetTarget,
}

async fn reset_test(
    State(m): State<Manager>,
    Path((id, tid)): Path<(String, String)>,
    bytes: Bytes,
) -> ApiResult {
    let b: ResetBody = body(&bytes)?;
    blocking(move || {
        m.with_session(&id, |s, _| {
            Ok(Json(json!({"test": s.reset_test(&tid, b.to)?})))
        })
    })
    .await
}

#[derive(Deserialize)]
struct FeedbackBody {
    instruction: String,
}

async fn feedback(
    State(m): State<Manager>,
    Path((id, tid)): Path<(String, String)>,
    bytes: Bytes,
) -> ApiResult {
    let b: FeedbackBody = body(&bytes)?;
    blocking(move || {
        m.with_session(&id, |s, t| {
            let index = s.feedback(t, &tid, &b.instruction)?;
            Ok(Json(json!({"index": index, "test": s.test(&tid)?})))
        })
    })
    .await
}

#[derive(Deserialize)]
struct FlagsBody {
    selected: Option<bool>,
    liked: Option<Liked>,
}

async fn flags(
    State(m): State<Manager>,
    Path((id, tid)): Path<(String, String)>,
    bytes: Bytes,
) -> ApiResult {
    let b: FlagsBody = body(&bytes)?;
    blocking(move || {
        m.with_session(&id, |s, _| {
            let entry = s.set_flags(&tid, b.selected, b.liked)?;
            Ok(Json(
                json!({"test": entry, "selection": s.selected_ids(), "totals": s.totals(None)?}),
            ))
        })
    })
    .await
}

async fn delete_test(
    State(m): State<Manager>,
    Path((id, tid)): Path<(String, String)>,
) -> ApiResult {
    blocking(move || {
        m.with_session(&id, |s, _| {
            s.delete_test(&tid)?;
            Ok(Json(
                json!({"deleted": tid, "selection": s.selected_ids(), "totals": s.totals(None)?}),
            ))
        })
    })
    .await
}

#[derive(Deserialize)]
struct BulkBody {
    action: BulkAction,
}

async fn bulk(State(m): State<Manager>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let b: BulkBody = body(&bytes)?;
    blocking(move || {
        m.with_session(&id, |s, _| {
            s.bulk(b.action)?;
            Ok(Json(
                json!({"tests": s.tests, "selection": s.selected_ids(), "totals": s.totals(None)?}),
            ))
        })
    })
    .await
}

async fn coverage(
    State(m): State<Manager>,
    Path(id): Path<String>,
    Query(q): Query<BTreeMap<String, String>>,
) -> ApiResult {
    let selection: Option<Vec<String>> = q.get("selected").map(|v| {
        v.split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(str::to_string)
            .collect()
    });
    blocking(move || {
        m.read_session(&id, |s| {
            let totals = s.totals(selection.as_deref())?;
            let selection = selection.unwrap_or_else(|| s.selected_ids());
            Ok(Json(json!({"selection": selection, "totals": totals})))
        })
    })
    .await
}

async fn lines(State(m): State<Manager>, Path(id): Path<String>) -> ApiResult {
    blocking(move || {
        m.read_session(&id, |s| {
            let lines = s.lines()?;
            let mutation_ran = s.coverage.as_ref().is_some_and(|c| c.mutation_ran);
            Ok(Json(json!({"mutation_ran": mutation_ran, "lines": lines})))
        })
    })
    .await
}

#[derive(Deserialize)]
struct ApplyBody {
    destination: ApplyDestination,
    ids: Option<Vec<String>>,
}

async fn apply(State(m): State<Manager>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let b: ApplyBody = body(&bytes)?;
    blocking(move || {
        m.with_session(&id, |s, t| {
            let applied = s.apply(t, b.ids.as_deref(), &b.destination)?;
            Ok(Json(json!({"path": applied.path, "tests": applied.tests})))
        })
    })
    .await
}

async fn versions(State(m): State<Manager>, Path((id, tid)): Path<(String, String)>) -> ApiResult {
    blocking(move || {
        m.read_session(&id, |s| {
            if !s.is_ready() {
                return Err(SessionError::WrongPhase(s.phase.name()));
            }
            let t = s.test(&tid)?;
            Ok(Json(
                json!({"versions": t.llm_versions, "active": t.active_version}),
            ))
        })
    })
    .await
}

#[derive(Deserialize)]
struct ActiveBody {
    index: usize,
}

async fn set_active(
    State(m): State<Manager>,
    Path((id, tid)): Path<(String, String)>,
    bytes: Bytes,
) -> ApiResult {
    let b: ActiveBody = body(&bytes)?;
    blocking(move || {
        m.with_session(&id, |s, _| {
            Ok(Json(json!({"test": s.set_active_version(&tid, b.index)?})))
        })
    })
    .await
}

/// Serves the API until the future is dropped or the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, manager: Manager) -> std::io::Result<()> {
    axum::serve(listener, router(manager)).await
}
