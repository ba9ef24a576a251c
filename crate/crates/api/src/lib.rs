//! HTTP service over taforge workspaces. Everything lives under `/v1`.

pub mod client;
pub mod config;
pub mod edits;
pub mod error;
mod openapi;
mod routes;
pub mod state;
pub mod views;

pub use config::{ClockMode, ServiceConfig, DEFAULT_PORT};
pub use error::{ApiError, ApiResult, MACHINE_CODES};
pub use openapi::document as openapi_document;
pub use routes::router;
pub use state::{App, Job, JobStatus, SharedApp};

/// Binds and serves until ctrl-c. Refuses non-loopback addresses unless a
/// bearer token is configured.
pub async fn serve(config: ServiceConfig) -> taforge_core::Result<()> {
    if !config.bind.ip().is_loopback() && config.token.is_none() {
        return Err(taforge_core::Error::InvalidArgument(format!(
            "refusing to bind {} without TAFORGE_API_TOKEN",
            config.bind
        )));
    }
    let bind = config.bind;
    let app = App::open(config)?;
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| taforge_core::Error::io(bind.to_string(), e))?;
    tracing::info!(%bind, "listening");
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| taforge_core::Error::io(bind.to_string(), e))
}
