use std::future::Future;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::Router;
use meronym_core::clock::{Clock, SystemClock};
use meronym_core::corpus::{CorpusError, CorpusPaths};
use meronym_core::{Service, ServiceConfig};
use tokio::net::TcpListener;

use crate::error::GatewayError;
use crate::routes;
use crate::store::{Store, StoreError};

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub corpus: CorpusPaths,
    pub store_dir: PathBuf,
    pub bind: String,
    /// Bearer token accepted on `/admin/*` routes and for the full outbox.
    pub admin_token: String,
    pub service: ServiceConfig,
}

pub(crate) struct Inner {
    pub service: Service,
    pub store: Store,
    pub admin_token: String,
    persist: Mutex<()>,
}

impl Inner {
    /// Appends pending journal events and rewrites the state document.
    pub fn persist(&self) -> Result<(), StoreError> {
        let _guard = self.persist.lock().unwrap_or_else(|e| e.into_inner());
        self.store.append_journal(&self.service.drain_journal())?;
        self.store.save(&self.service.export_state())?;
        Ok(())
    }
}

pub(crate) type AppState = Arc<Inner>;

/// A loaded service bound to its store, ready to be served.
#[derive(Clone)]
pub struct Gateway {
    inner: AppState,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("store", &self.inner.store).finish_non_exhaustive()
    }
}

fn load_corpus(paths: &CorpusPaths) -> Result<meronym_core::corpus::CorpusSnapshot, GatewayError> {
    for path in [&paths.publications, &paths.authors, &paths.follows] {
        if !path.is_file() {
            return Err(GatewayError::ConfigError {
                path: Some(path.clone()),
                message: format!("corpus file not found: {}", path.display()),
            });
        }
    }
    paths.load().map_err(|e| match e {
        CorpusError::Io { ref path, .. } => GatewayError::ConfigError {
            path: Some(path.clone()),
            message: e.to_string(),
        },
        other => GatewayError::ConfigError {
            path: None,
            message: format!("corpus rejected: {other}"),
        },
    })
}

impl Gateway {
    pub fn open(config: &GatewayConfig, clock: Arc<dyn Clock>) -> Result<Self, GatewayError> {
        let snapshot = load_corpus(&config.corpus)?;
        let store = Store::open(&config.store_dir)?;
        let persisted = store.load()?.unwrap_or_default();
        let service = Service::restore(config.service.clone(), snapshot, clock, persisted);
        let inner = Arc::new(Inner {
            service,
            store,
            admin_token: config.admin_token.clone(),
            persist: Mutex::new(()),
        });
        inner.persist()?;
        Ok(Self { inner })
    }

    pub fn service(&self) -> &Service {
        &self.inner.service
    }

    pub fn store(&self) -> &Store {
        &self.inner.store
    }

    pub fn router(&self) -> Router {
        routes::router(self.inner.clone())
    }

    /// Publishes queued broadcasts, marks notifications sent and writes the
    /// final state.
    pub fn shutdown(&self) -> Result<(), GatewayError> {
        let report = self.inner.service.flush();
        let delivered = self.inner.service.deliver_notifications();
        tracing::info!(published = report.published, delivered, "queues flushed");
        Ok(self.inner.persist()?)
    }

    /// Serves on `listener` until `shutdown` resolves, then drains in-flight
    /// requests and runs [`Gateway::shutdown`].
    pub async fn run(self, listener: TcpListener, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), GatewayError> {
        axum::serve(listener, self.router())
            .with_graceful_shutdown(shutdown)
            .await
            .map_err(GatewayError::Server)?;
        self.shutdown()
    }
}

/// Opens the gateway against the wall clock and serves on `config.bind`.
pub async fn serve(config: GatewayConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), GatewayError> {
    let gateway = Gateway::open(&config, Arc::new(SystemClock))?;
    let listener = TcpListener::bind(&config.bind).await.map_err(|source| GatewayError::Bind {
        addr: config.bind.clone(),
        source,
    })?;
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "listening");
    }
    gateway.run(listener, shutdown).await
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
