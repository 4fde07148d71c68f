//! HTTP service running the study protocol.
//!
//! Sessions live in memory and every accepted input is first appended to a
//! JSON Lines event log, which is also the export and analysis format.

pub mod config;
pub mod http;
pub mod service;

use std::sync::Arc;

use conseq_core::study::StudyContext;

pub use config::{ConfigError, ServiceConfig};
pub use http::{router, ErrorBody};
pub use service::{system_clock, Clock, Presentation, ServiceError, SessionView, StudyService};

/// Opens the log and serves until Ctrl-C.
pub async fn serve(cfg: ServiceConfig) -> Result<(), ServiceError> {
    let service = StudyService::open(&cfg.data_file, StudyContext::builtin(), cfg.explain.clone())?;
    let app = router(Arc::new(service), cfg.admin_token.clone(), cfg.alpha);
    let listener = tokio::net::TcpListener::bind(cfg.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
