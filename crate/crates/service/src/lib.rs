//! HTTP front end for a [`SessionStore`].
//!
//! | method | path | body | success |
//! |---|---|---|---|
//! | POST | `/sessions` | multipart CSV files, optional `types` JSON field | 201 session |
//! | DELETE | `/sessions/{sid}` | | 204 |
//! | GET | `/sessions/{sid}/schema` | | schema |
//! | GET | `/sessions/{sid}/suggestions` | | list of questions |
//! | POST | `/sessions/{sid}/ask` | `{"question"}` | pipeline, doc, ranking |
//! | GET / POST | `/sessions/{sid}/pipelines` | `{"text"}` or `{"steps"}` | list / 201 pipeline |
//! | GET / PATCH / DELETE | `/sessions/{sid}/pipelines/{pid}` | `{"text"}` | view / replaced / 204 |
//! | POST | `/sessions/{sid}/pipelines/{pid}/steps` | `{"step"}` | appended |
//! | PATCH / DELETE | `/sessions/{sid}/pipelines/{pid}/steps/{k}` | `{"step"}` | edited / deleted |
//! | GET | `/pipelines/{pid}/datamation` | | `datamation/v1` document |
//! | GET | `/schemas/datamation-v1` | | JSON Schema of the document |
//!
//! A step is either its text (`"FILTER[#2, 'dept' = 'CS']"`) or the JSON form
//! of a `QdmrStep`. Errors are `{"code", "message", ...}` with a 4xx status.

mod error;

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use datamate_core::datamation::SCHEMA_JSON;
use datamate_core::ingest::{CsvFile, TypeHints};
use datamate_core::session::{EditOutcome, SessionError, SessionStore};
use datamate_core::text::parse_step;
use datamate_core::QdmrStep;
use serde::{Deserialize, Serialize};

pub use error::{status_of, ApiError, ErrorBody};

/// Upload size cap for `POST /sessions`.
pub const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

pub struct AppState {
    pub store: SessionStore,
    /// When set, every session is written here after each change.
    pub snapshot_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(store: SessionStore) -> Self {
        AppState {
            store,
            snapshot_dir: None,
        }
    }

    /// Restores every `*.json` snapshot in the configured directory and
    /// returns how many were loaded. Unreadable files are logged and skipped.
    pub fn restore_snapshots(&self) -> std::io::Result<usize> {
        let Some(dir) = &self.snapshot_dir else {
            return Ok(0);
        };
        std::fs::create_dir_all(dir)?;
        let mut loaded = 0;
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|x| x == "json") {
                match self.store.load_snapshot(&path) {
                    Ok(_) => loaded += 1,
                    Err(e) => {
                        tracing::warn!(path = %path.display(), error = %e, "snapshot skipped")
                    }
                }
            }
        }
        Ok(loaded)
    }

    fn persist(&self, sid: &str) {
        if let Some(dir) = &self.snapshot_dir {
            if let Err(e) = self.store.save_snapshot(sid, dir) {
                tracing::warn!(session = sid, error = %e, "snapshot not written");
            }
        }
    }

    fn forget(&self, sid: &str) {
        if let Some(dir) = &self.snapshot_dir {
            let _ = std::fs::remove_file(dir.join(format!("{sid}.json")));
        }
    }
}

type Shared = Arc<AppState>;

/// Runs store work off the async executor.
async fn blocking<T, F>(state: &Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&AppState) -> Result<T, ApiError> + Send + 'static,
{
    let state = state.clone();
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(t)| t)
        .map_err(|e| ApiError::bad_request("BadRequest", e.body_text()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepBody {
    Text(String),
    Step(QdmrStep),
}

impl StepBody {
    fn into_step(self, step_no: usize) -> Result<QdmrStep, ApiError> {
        match self {
            StepBody::Step(s) => Ok(s),
            StepBody::Text(t) => parse_step(&t, step_no).map_err(|e| SessionError::Parse(e).into()),
        }
    }
}

#[derive(Debug, Deserialize)]
struct AskRequest {
    question: String,
}

#[derive(Debug, Deserialize)]
struct TextRequest {
    text: String,
}

#[derive(Debug, Deserialize)]
struct CreateRequest {
    text: Option<String>,
    steps: Option<Vec<StepBody>>,
}

#[derive(Debug, Deserialize)]
struct StepRequest {
    step: StepBody,
}

#[derive(Debug, Serialize)]
struct SessionCreated {
    session_id: String,
    schema: datamate_core::Schema,
    suggestions: Vec<String>,
}

async fn create_session(
    State(state): State<Shared>,
    mut form: Multipart,
) -> Result<Response, ApiError> {
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut hints = TypeHints::new();
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request("BadRequest", e.body_text()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let file_name = field.file_name().map(str::to_string);
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiError::bad_request("BadRequest", e.body_text()))?;
        match file_name {
            Some(f) => files.push((f, bytes.to_vec())),
            None if name == "types" => {
                hints = serde_json::from_slice(&bytes)
                    .map_err(|e| ApiError::bad_request("BadTypeHints", e.to_string()))?;
            }
            None => {
                return Err(ApiError::bad_request(
                    "BadRequest",
                    format!("unexpected field '{name}'"),
                ))
            }
        }
    }
    let created = blocking(&state, move |st| {
        let csv: Vec<CsvFile> = files
            .iter()
            .map(|(name, contents)| CsvFile { name, contents })
            .collect();
        let sid = st.store.ingest(&csv, &hints)?;
        st.persist(&sid);
        Ok(SessionCreated {
            schema: st.store.schema(&sid)?,
            suggestions: st.store.suggestions(&sid)?,
            session_id: sid,
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn close_session(
    State(state): State<Shared>,
    Path(sid): Path<String>,
) -> Result<StatusCode, ApiError> {
    blocking(&state, move |st| {
        st.store.close(&sid)?;
        st.forget(&sid);
        Ok(StatusCode::NO_CONTENT)
    })
    .await
}

async fn schema(
    State(state): State<Shared>,
    Path(sid): Path<String>,
) -> Result<Response, ApiError> {
    blocking(&state, move |st| {
        Ok(Json(st.store.schema(&sid)?).into_response())
    })
    .await
}

async fn suggestions(
    State(state): State<Shared>,
    Path(sid): Path<String>,
) -> Result<Response, ApiError> {
    blocking(&state, move |st| {
        Ok(Json(st.store.suggestions(&sid)?).into_response())
    })
    .await
}

async fn ask(
    State(state): State<Shared>,
    Path(sid): Path<String>,
    payload: Result<Json<AskRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    blocking(&state, move |st| {
        let out = st.store.ask(&sid, &req.question)?;
        st.persist(&sid);
        Ok(Json(out).into_response())
    })
    .await
}

async fn list_pipelines(
    State(state): State<Shared>,
    Path(sid): Path<String>,
) -> Result<Response, ApiError> {
    blocking(&state, move |st| {
        Ok(Json(st.store.list(&sid)?).into_response())
    })
    .await
}

fn edited(st: &AppState, sid: &str, out: EditOutcome) -> Response {
    st.persist(sid);
    Json(out).into_response()
}

async fn create_pipeline(
    State(state): State<Shared>,
    Path(sid): Path<String>,
    payload: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    blocking(&state, move |st| {
        let out = match (req.text, req.steps) {
            (Some(text), None) => st.store.create_pipeline_text(&sid, &text)?,
            (None, Some(steps)) => {
                let steps = steps
                    .into_iter()
                    .enumerate()
                    .map(|(i, s)| s.into_step(i + 1))
                    .collect::<Result<Vec<_>, _>>()?;
                st.store.create_pipeline(&sid, steps)?
            }
            _ => {
                return Err(ApiError::bad_request(
                    "BadRequest",
                    "give exactly one of 'text' or 'steps'",
                ))
            }
        };
        st.persist(&sid);
        Ok((StatusCode::CREATED, Json(out)).into_response())
    })
    .await
}

async fn get_pipeline(
    State(state): State<Shared>,
    Path((sid, pid)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    blocking(&state, move |st| {
        Ok(Json(st.store.get(&sid, &pid)?).into_response())
    })
    .await
}

async fn replace_pipeline(
    State(state): State<Shared>,
    Path((sid, pid)): Path<(String, String)>,
    payload: Result<Json<TextRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    blocking(&state, move |st| {
        let out = st.store.replace(&sid, &pid, &req.text)?;
        Ok(edited(st, &sid, out))
    })
    .await
}

async fn delete_pipeline(
    State(state): State<Shared>,
    Path((sid, pid)): Path<(String, String)>,
) -> Result<StatusCode, ApiError> {
    blocking(&state, move |st| {
        st.store.delete_pipeline(&sid, &pid)?;
        st.persist(&sid);
        Ok(StatusCode::NO_CONTENT)
    })
    .await
}

async fn append_step(
    State(state): State<Shared>,
    Path((sid, pid)): Path<(String, String)>,
    payload: Result<Json<StepRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    blocking(&state, move |st| {
        let next = st.store.get(&sid, &pid)?.steps.len() + 1;
        let out = st
            .store
            .append_step(&sid, &pid, req.step.into_step(next)?)?;
        Ok(edited(st, &sid, out))
    })
    .await
}

async fn edit_step(
    State(state): State<Shared>,
    Path((sid, pid, k)): Path<(String, String, usize)>,
    payload: Result<Json<StepRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    blocking(&state, move |st| {
        let out = st
            .store
            .edit_step(&sid, &pid, k, req.step.into_step(k.max(1))?)?;
        Ok(edited(st, &sid, out))
    })
    .await
}

async fn delete_step(
    State(state): State<Shared>,
    Path((sid, pid, k)): Path<(String, String, usize)>,
) -> Result<Response, ApiError> {
    blocking(&state, move |st| {
        let out = st.store.delete_step(&sid, &pid, k)?;
        Ok(edited(st, &sid, out))
    })
    .await
}

async fn datamation(
    State(state): State<Shared>,
    Path(pid): Path<String>,
) -> Result<Response, ApiError> {
    blocking(&state, move |st| {
        let doc = st.store.datamation(&pid)?;
        Ok(([("content-type", "application/json")], doc.to_json()).into_response())
    })
    .await
}

async fn doc_schema() -> Response {
    ([("content-type", "application/schema+json")], SCHEMA_JSON).into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{sid}", axum::routing::delete(close_session))
        .route("/sessions/{sid}/schema", get(schema))
        .route("/sessions/{sid}/suggestions", get(suggestions))
        .route("/sessions/{sid}/ask", post(ask))
        .route(
            "/sessions/{sid}/pipelines",
            get(list_pipelines).post(create_pipeline),
        )
        .route(
            "/sessions/{sid}/pipelines/{pid}",
            get(get_pipeline)
                .patch(replace_pipeline)
                .delete(delete_pipeline),
        )
        .route("/sessions/{sid}/pipelines/{pid}/steps", post(append_step))
        .route(
            "/sessions/{sid}/pipelines/{pid}/steps/{k}",
            patch(edit_step).delete(delete_step),
        )
        .route("/pipelines/{pid}/datamation", get(datamation))
        .route("/schemas/datamation-v1", get(doc_schema))
        .route("/healthz", get(|| async { "ok" }))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
