//! Server-sent-events transport.
//!
//! `GET /sse` opens a stream whose first event, `endpoint`, names the
//! session's POST URL. Requests POSTed there are answered with 202 and their
//! responses arrive on the stream as `message` events.

use std::collections::HashMap;
use std::convert::Infallible;
use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::routing::{get, post};
use axum::Router;
use futures::stream::{self, Stream, StreamExt};
use serde::Deserialize;
use serde_json::Value;
use tokio::sync::{mpsc, oneshot};
use uuid::Uuid;

use crate::protocol::{failure, RpcError};
use crate::server::McpServer;
use crate::stdio::DEFAULT_MAX_LINE_BYTES;

#[derive(Debug, Clone, Copy)]
pub struct SseConfig {
    /// How long a session survives after its stream disconnects.
    pub session_timeout: Duration,
    pub max_body_bytes: usize,
    /// Comment frames on idle streams; also how quickly a dead client is noticed.
    pub keep_alive: Duration,
}

impl Default for SseConfig {
    fn default() -> Self {
        Self {
            session_timeout: Duration::from_secs(30),
            max_body_bytes: DEFAULT_MAX_LINE_BYTES,
            keep_alive: Duration::from_secs(15),
        }
    }
}

struct Session {
    tx: mpsc::UnboundedSender<String>,
    disconnected_at: Option<Instant>,
}

struct AppState {
    server: McpServer,
    config: SseConfig,
    sessions: Mutex<HashMap<Uuid, Session>>,
}

impl AppState {
    fn sessions(&self) -> std::sync::MutexGuard<'_, HashMap<Uuid, Session>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn reap(&self) {
        let timeout = self.config.session_timeout;
        self.sessions()
            .retain(|_, s| s.disconnected_at.is_none_or(|t| t.elapsed() < timeout));
    }
}

/// Marks the session disconnected when the client's stream is dropped.
struct StreamGuard {
    state: Arc<AppState>,
    id: Uuid,
}

impl Drop for StreamGuard {
    fn drop(&mut self) {
        if let Some(s) = self.state.sessions().get_mut(&self.id) {
            s.disconnected_at = Some(Instant::now());
        }
        log::debug!("sse session {} disconnected", self.id);
    }
}

async fn open_stream(State(state): State<Arc<AppState>>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let id = Uuid::new_v4();
    let (tx, rx) = mpsc::unbounded_channel();
    state.sessions().insert(
        id,
        Session {
            tx,
            disconnected_at: None,
        },
    );
    log::debug!("sse session {id} opened");
    let endpoint = Event::default()
        .event("endpoint")
        .data(format!("/message?sessionId={id}"));
    let keep_alive = KeepAlive::new().interval(state.config.keep_alive);
    let guard = StreamGuard { state, id };
    let messages = stream::unfold((rx, guard), |(mut rx, guard)| async move {
        let msg = rx.recv().await?;
        Some((Ok(Event::default().event("message").data(msg)), (rx, guard)))
    });
    Sse::new(stream::once(async { Ok(endpoint) }).chain(messages)).keep_alive(keep_alive)
}

#[derive(Deserialize)]
struct SessionQuery {
    #[serde(rename = "sessionId")]
    session_id: String,
}

async fn post_message(State(state): State<Arc<AppState>>, Query(q): Query<SessionQuery>, body: Bytes) -> StatusCode {
    let tx = Uuid::parse_str(&q.session_id)
        .ok()
        .and_then(|id| state.sessions().get(&id).map(|s| s.tx.clone()));
    let Some(tx) = tx else {
        return StatusCode::NOT_FOUND;
    };
    let server = state.server.clone();
    tokio::task::spawn_blocking(move || {
        let reply = match std::str::from_utf8(&body) {
            Ok(text) => server.handle_line(text),
            Err(e) => Some(failure(Value::Null, &RpcError::parse(e)).to_string()),
        };
        if let Some(reply) = reply {
            // A closed stream just drops the response.
            let _ = tx.send(reply);
        }
    });
    StatusCode::ACCEPTED
}

fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sse", get(open_stream))
        .route("/message", post(post_message))
        .layer(DefaultBodyLimit::max(state.config.max_body_bytes))
        .with_state(state)
}

/// Serves until `shutdown` resolves. Open streams are then closed and
/// in-flight calls finish before this returns.
pub async fn serve_sse(
    server: McpServer,
    listener: tokio::net::TcpListener,
    config: SseConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    let state = Arc::new(AppState {
        server,
        config,
        sessions: Mutex::new(HashMap::new()),
    });
    let reaper = {
        let state = state.clone();
        let period = (config.session_timeout / 4).max(Duration::from_millis(10));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                state.reap();
            }
        })
    };
    let closing = state.clone();
    let result = axum::serve(listener, router(state))
        .with_graceful_shutdown(async move {
            shutdown.await;
            closing.sessions().clear();
        })
        .await;
    reaper.abort();
    result
}

/// An SSE server on its own runtime thread.
pub struct SseHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<io::Result<()>>>,
}

impl SseHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) -> io::Result<()> {
        self.stop()
    }

    fn stop(&mut self) -> io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for SseHandle {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}

/// Binds `bind` (port 0 picks a free port) and serves in the background.
pub fn spawn_sse_background(server: McpServer, bind: &str, config: SseConfig) -> io::Result<SseHandle> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind(bind))?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = thread::Builder::new().name("hr-mcp-sse".into()).spawn(move || {
        runtime.block_on(serve_sse(server, listener, config, async {
            let _ = rx.await;
        }))
    })?;
    Ok(SseHandle {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
