// SPDX-License-Identifier: Apache-2.0

//! Read-only HTTP API over one loaded session, plus static files for the viewer.

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::{json, Value};

use crate::session::{QueryError, Session};

#[derive(Clone)]
struct AppState {
    session: Arc<Session>,
    static_dir: Option<Arc<PathBuf>>,
}

type ApiResult = Result<Json<Value>, (StatusCode, Json<Value>)>;

fn fail(status: StatusCode, msg: impl Into<String>) -> (StatusCode, Json<Value>) {
    (status, Json(json!({ "error": msg.into() })))
}

fn query_fail(e: QueryError) -> (StatusCode, Json<Value>) {
    match e {
        QueryError::Path(_) => fail(StatusCode::NOT_FOUND, e.to_string()),
        QueryError::Range { .. } => fail(StatusCode::BAD_REQUEST, e.to_string()),
        QueryError::Translate(_) => fail(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

fn param<'a>(q: &'a HashMap<String, String>, name: &str) -> Result<&'a str, (StatusCode, Json<Value>)> {
    q.get(name)
        .map(String::as_str)
        .ok_or_else(|| fail(StatusCode::BAD_REQUEST, format!("missing query parameter `{name}`")))
}

fn time_param(q: &HashMap<String, String>, name: &str, default: Option<u64>) -> Result<u64, (StatusCode, Json<Value>)> {
    match (q.get(name), default) {
        (None, Some(d)) => Ok(d),
        (None, None) => Err(fail(StatusCode::BAD_REQUEST, format!("missing query parameter `{name}`"))),
        (Some(s), _) => s
            .parse()
            .map_err(|_| fail(StatusCode::BAD_REQUEST, format!("`{name}` must be a non-negative integer, got `{s}`"))),
    }
}

async fn meta(State(st): State<AppState>) -> Json<Value> {
    Json(st.session.meta_json())
}

async fn hierarchy(State(st): State<AppState>) -> Json<Value> {
    Json(st.session.hierarchy_json())
}

async fn value(State(st): State<AppState>, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let path = param(&q, "path")?;
    let time = time_param(&q, "time", None)?;
    let v = st.session.value(path, time).map_err(query_fail)?;
    Ok(Json(json!({
        "formatted": v.formatted,
        "kind": v.kind,
        "raw_bits": v.raw_bits,
    })))
}

async fn changes(State(st): State<AppState>, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let path = param(&q, "path")?;
    let from = time_param(&q, "from", Some(0))?;
    let to = time_param(&q, "to", Some(st.session.trace().end_time().max(from)))?;
    let list = st.session.changes(path, from, to).map_err(query_fail)?;
    let items: Vec<Value> = list
        .into_iter()
        .map(|c| match c.raw_bits {
            Some(bits) => json!({ "time": c.time, "formatted": c.formatted, "raw_bits": bits }),
            None => json!({ "time": c.time, "formatted": c.formatted }),
        })
        .collect();
    Ok(Json(Value::Array(items)))
}

async fn enum_map(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    st.session
        .enum_json(&id)
        .map(Json)
        .ok_or_else(|| fail(StatusCode::NOT_FOUND, format!("unknown enum `{id}`")))
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        Some("wasm") => "application/wasm",
        _ => "application/octet-stream",
    }
}

async fn static_file(State(st): State<AppState>, uri: Uri) -> Response {
    let not_found = || fail(StatusCode::NOT_FOUND, format!("no such resource `{}`", uri.path())).into_response();
    if uri.path().starts_with("/api/") {
        return not_found();
    }
    let Some(root) = st.static_dir.as_deref() else {
        return not_found();
    };
    let rel = uri.path().trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let rel = Path::new(rel);
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return fail(StatusCode::BAD_REQUEST, "invalid resource path").into_response();
    }
    let full = root.join(rel);
    match tokio::fs::read(&full).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&full))], bytes).into_response(),
        Err(_) => not_found(),
    }
}

pub fn router(session: Arc<Session>, static_dir: Option<PathBuf>) -> Router {
    Router::new()
        .route("/api/meta", get(meta))
        .route("/api/hierarchy", get(hierarchy))
        .route("/api/value", get(value))
        .route("/api/changes", get(changes))
        .route("/api/enums/{id}", get(enum_map))
        .fallback(static_file)
        .with_state(AppState {
            session,
            static_dir: static_dir.map(Arc::new),
        })
}

/// Serves until `shutdown` resolves.
pub async fn serve<F>(
    listener: tokio::net::TcpListener,
    session: Session,
    static_dir: Option<PathBuf>,
    shutdown: F,
) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(Arc::new(session), static_dir))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A server running on its own runtime thread.
pub struct BackgroundServer {
    addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl BackgroundServer {
    /// Binds `127.0.0.1:port` (0 picks a free port) and starts serving.
    pub fn start(session: Session, static_dir: Option<PathBuf>, port: u16) -> std::io::Result<BackgroundServer> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let listener = runtime.block_on(tokio::net::TcpListener::bind(("127.0.0.1", port)))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(serve(listener, session, static_dir, async {
                let _ = rx.await;
            }))
        });
        Ok(BackgroundServer {
            addr,
            stop: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub fn shutdown(mut self) -> std::io::Result<()> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}
