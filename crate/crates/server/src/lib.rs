//! HTTP/JSON service exposing stream generation, verification, benchmarks
//! and long-lived incremental engine sessions.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;

pub mod error;
mod handlers;
pub mod state;

pub use error::{ApiError, ApiResult};
pub use state::AppState;

/// Request bodies carry whole edge files.
const BODY_LIMIT: usize = 512 * 1024 * 1024;

pub fn router(state: Arc<AppState>) -> Router {
    use handlers::*;
    Router::new()
        .route("/health", get(health))
        .route("/v1/gen", post(gen))
        .route("/v1/verify", post(verify))
        .route("/v1/bench", post(bench))
        .route("/v1/staleness", post(staleness))
        .route("/v1/policy-compare", post(policy_compare))
        .route("/v1/speedup-table", post(speedup_table))
        .route("/v1/params/init", post(params_init))
        .route("/v1/params/dump", post(params_dump))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(session_status).delete(delete_session))
        .route("/v1/sessions/{id}/batches", post(process_batch))
        .route("/v1/sessions/{id}/edges", post(enqueue))
        .route("/v1/sessions/{id}/step", post(step))
        .route("/v1/sessions/{id}/embeddings/{node}", get(embedding))
        .layer(axum::extract::DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

pub async fn serve(listener: TcpListener, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "listening");
    }
    axum::serve(listener, router(AppState::new()))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds `addr` and serves on a background task until the runtime stops.
pub async fn spawn(addr: SocketAddr) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<std::io::Result<()>>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let handle = tokio::spawn(serve(listener, std::future::pending()));
    Ok((local, handle))
}
