//! HTTP interface to a single-project engine, with a server-sent event
//! stream that mirrors the engine's commit order.

mod error;
mod routes;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::broadcast;

use scenecraft_core::events::{EventRecord, EventSink};
use scenecraft_core::Engine;

pub use error::{status_for, ApiError, ServeError};
pub use routes::zip_bundle;

/// Events buffered per stream before a slow client starts missing them.
pub const EVENT_BUFFER: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Endpoint {
    pub method: &'static str,
    pub path: &'static str,
    /// Changes engine state.
    pub mutation: bool,
}

const fn ep(method: &'static str, path: &'static str, mutation: bool) -> Endpoint {
    Endpoint {
        method,
        path,
        mutation,
    }
}

/// Every route the server answers.
pub const ENDPOINTS: &[Endpoint] = &[
    ep("GET", "/scene", false),
    ep("POST", "/elements", true),
    ep("DELETE", "/elements/{id}", true),
    ep("PATCH", "/elements/{id}/transform", true),
    ep("POST", "/proxies", true),
    ep("DELETE", "/proxies/{label}", true),
    ep("POST", "/modules/{id}/prompt", true),
    ep("GET", "/modules/{id}/session", false),
    ep("GET", "/context", false),
    ep("GET", "/sliders/{element}", false),
    ep("PATCH", "/sliders", true),
    ep("GET", "/bundle", false),
    ep("GET", "/preview/{*path}", false),
    ep("GET", "/events", false),
];

struct BroadcastSink(broadcast::Sender<EventRecord>);

impl EventSink for BroadcastSink {
    fn publish(&self, record: &EventRecord) {
        // no receivers is fine
        let _ = self.0.send(record.clone());
    }
}

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    events: broadcast::Sender<EventRecord>,
}

/// Builds the router and subscribes it to the engine's events.
pub fn router(engine: Arc<Engine>) -> Router {
    let (tx, _) = broadcast::channel(EVENT_BUFFER);
    engine.subscribe(Arc::new(BroadcastSink(tx.clone())));
    routes::build(AppState { engine, events: tx })
}

pub async fn bind(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServeError::PortInUse(addr.port()),
        _ => ServeError::Io(e),
    })
}

/// Serves until the process ends.
pub async fn serve(engine: Arc<Engine>, addr: SocketAddr) -> Result<(), ServeError> {
    let listener = bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(engine)).await?;
    Ok(())
}
