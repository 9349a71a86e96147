//! Serves an in-memory [`Graph`] over the wire protocol, with optional fault
//! injection for exercising clients.

use std::io;
use std::net::{SocketAddr, TcpListener};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use ppr_core::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokio::sync::oneshot;

use crate::wire::{InDegreeResponse, OutResponse};

/// Fault injection and access control for [`serve_graph`].
#[derive(Debug, Clone)]
pub struct ServerOptions {
    /// Added before every response.
    pub latency: Duration,
    /// Fraction of requests answered with 429.
    pub rate_429: f64,
    /// Fraction of requests answered with 503.
    pub rate_5xx: f64,
    /// Value of the `Retry-After` header on injected 429s.
    pub retry_after_secs: u64,
    /// Seeds the fault draws.
    pub fault_seed: u64,
    /// When set, requests must carry `Authorization: Bearer <token>`.
    pub auth_token: Option<String>,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            latency: Duration::ZERO,
            rate_429: 0.0,
            rate_5xx: 0.0,
            retry_after_secs: 1,
            fault_seed: 0,
            auth_token: None,
        }
    }
}

/// Request counters. Injected faults are counted separately from answered
/// requests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServerStats {
    pub out_answered: u64,
    pub in_degree_answered: u64,
    pub not_found: u64,
    pub injected_429: u64,
    pub injected_5xx: u64,
    pub unauthorized: u64,
}

#[derive(Default)]
struct Counters {
    out_answered: AtomicU64,
    in_degree_answered: AtomicU64,
    not_found: AtomicU64,
    injected_429: AtomicU64,
    injected_5xx: AtomicU64,
    unauthorized: AtomicU64,
}

struct AppState {
    graph: Arc<Graph>,
    options: ServerOptions,
    rng: Mutex<ChaCha8Rng>,
    counters: Counters,
}

fn bump(c: &AtomicU64) {
    c.fetch_add(1, Ordering::Relaxed);
}

impl AppState {
    /// Applies latency, auth and fault injection. `Some` short-circuits the
    /// request.
    async fn gate(&self, headers: &HeaderMap) -> Option<Response> {
        if !self.options.latency.is_zero() {
            tokio::time::sleep(self.options.latency).await;
        }
        if let Some(token) = &self.options.auth_token {
            let expected = format!("Bearer {token}");
            let given = headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok());
            if given != Some(expected.as_str()) {
                bump(&self.counters.unauthorized);
                return Some(StatusCode::UNAUTHORIZED.into_response());
            }
        }
        let draw: f64 = self.rng.lock().expect("fault rng poisoned").random();
        if draw < self.options.rate_429 {
            bump(&self.counters.injected_429);
            let retry = self.options.retry_after_secs.to_string();
            return Some((StatusCode::TOO_MANY_REQUESTS, [(header::RETRY_AFTER, retry)]).into_response());
        }
        if draw < self.options.rate_429 + self.options.rate_5xx {
            bump(&self.counters.injected_5xx);
            return Some(StatusCode::SERVICE_UNAVAILABLE.into_response());
        }
        None
    }

    fn not_found(&self) -> Response {
        bump(&self.counters.not_found);
        (StatusCode::NOT_FOUND, Json(serde_json::json!({ "error": "unknown node" }))).into_response()
    }
}

async fn out_handler(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Response {
    if let Some(resp) = state.gate(&headers).await {
        return resp;
    }
    let Ok(u) = state.graph.index_of(&id) else {
        return state.not_found();
    };
    let ids = state.graph.ids();
    let out_neighbors: Vec<String> = state
        .graph
        .out_neighbors_slice(u)
        .iter()
        .map(|&v| ids.name(v).unwrap_or_default().to_owned())
        .collect();
    bump(&state.counters.out_answered);
    Json(OutResponse { id, out_degree: out_neighbors.len(), out_neighbors }).into_response()
}

async fn in_degree_handler(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Response {
    if let Some(resp) = state.gate(&headers).await {
        return resp;
    }
    let Ok(u) = state.graph.index_of(&id) else {
        return state.not_found();
    };
    bump(&state.counters.in_degree_answered);
    Json(InDegreeResponse { id, in_degree: state.graph.in_degree_of(u) }).into_response()
}

/// A running server. Dropping the handle shuts it down.
pub struct ServerHandle {
    addr: SocketAddr,
    state: Arc<AppState>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stats(&self) -> ServerStats {
        let c = &self.state.counters;
        let get = |x: &AtomicU64| x.load(Ordering::Relaxed);
        ServerStats {
            out_answered: get(&c.out_answered),
            in_degree_answered: get(&c.in_degree_answered),
            not_found: get(&c.not_found),
            injected_429: get(&c.injected_429),
            injected_5xx: get(&c.injected_5xx),
            unauthorized: get(&c.unauthorized),
        }
    }

    /// Blocks until the server stops on its own (normally never).
    pub fn wait(mut self) -> io::Result<()> {
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }

    pub fn shutdown(mut self) -> io::Result<()> {
        self.stop()
    }

    fn stop(&mut self) -> io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}

/// Starts serving `graph` on `bind` (e.g. `127.0.0.1:0`) from a background
/// thread. Bind errors are reported immediately.
pub fn serve_graph(graph: Arc<Graph>, bind: &str, options: ServerOptions) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(bind)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let state = Arc::new(AppState {
        graph,
        rng: Mutex::new(ChaCha8Rng::seed_from_u64(options.fault_seed)),
        options,
        counters: Counters::default(),
    });
    let app = Router::new()
        .route("/v1/nodes/{id}/out", get(out_handler))
        .route("/v1/nodes/{id}/in_degree", get(in_degree_handler))
        .with_state(Arc::clone(&state));
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::Builder::new().name("graph-server".into()).spawn(move || {
        let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener)?;
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
        })
    })?;
    log::info!("serving graph on {addr}");
    Ok(ServerHandle { addr, state, shutdown: Some(tx), thread: Some(thread) })
}
